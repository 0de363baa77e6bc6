#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace obstacle_fusion {

/// Decoded PNG as row-major samples; 8- or 16-bit single channel.
/// Color inputs are reduced to luma at load.
struct PngImage {
    int width = 0;
    int height = 0;
    int bit_depth = 8;                 // 8 or 16
    std::vector<std::uint16_t> samples;  // row-major, one sample per pixel

    std::uint16_t at(int x, int y) const { return samples[static_cast<std::size_t>(y) * width + x]; }
};

PngImage read_png(const std::string& path);

void write_png_gray8(const std::string& path, int width, int height,
                     const std::uint8_t* row_major);

void write_png_gray16(const std::string& path, int width, int height,
                      const std::uint16_t* row_major);

}  // namespace obstacle_fusion
