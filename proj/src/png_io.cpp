#include "obstacle_fusion/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "obstacle_fusion/errors.hpp"

namespace obstacle_fusion {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

PngImage read_png(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw IoError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: read struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng: info struct allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path + ": not a valid PNG file");
    }
    png_init_io(png, file.get());
    // Expand palettes and strip alpha so every pixel becomes gray or RGB.
    png_read_png(png, info,
                 PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA | PNG_TRANSFORM_GRAY_TO_RGB,
                 nullptr);

    PngImage out;
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.bit_depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    png_bytepp rows = png_get_rows(png, info);

    out.samples.resize(static_cast<std::size_t>(out.width) * out.height);
    for (int y = 0; y < out.height; ++y) {
        const png_bytep row = rows[y];
        for (int x = 0; x < out.width; ++x) {
            std::uint32_t value = 0;
            if (out.bit_depth == 16) {
                if (channels == 3) {
                    const std::uint32_t r = (row[6 * x] << 8) | row[6 * x + 1];
                    const std::uint32_t g = (row[6 * x + 2] << 8) | row[6 * x + 3];
                    const std::uint32_t b = (row[6 * x + 4] << 8) | row[6 * x + 5];
                    value = (299 * r + 587 * g + 114 * b) / 1000;
                } else {
                    value = (row[2 * x] << 8) | row[2 * x + 1];
                }
            } else {
                if (channels == 3) {
                    value = (299u * row[3 * x] + 587u * row[3 * x + 1] + 114u * row[3 * x + 2]) /
                            1000u;
                } else {
                    value = row[x];
                }
            }
            out.samples[static_cast<std::size_t>(y) * out.width + x] =
                static_cast<std::uint16_t>(value);
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

namespace {

void write_png(const std::string& path, int width, int height, int bit_depth,
               const std::vector<png_bytep>& rows) {
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw IoError("cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: write struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng: info struct allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng: failed writing " + path);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_gray8(const std::string& path, int width, int height,
                     const std::uint8_t* row_major) {
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(row_major + static_cast<std::size_t>(y) * width);
    write_png(path, width, height, 8, rows);
}

void write_png_gray16(const std::string& path, int width, int height,
                      const std::uint16_t* row_major) {
    // PNG stores 16-bit samples big-endian.
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height * 2);
    for (std::size_t i = 0; i < static_cast<std::size_t>(width) * height; ++i) {
        bytes[2 * i] = static_cast<std::uint8_t>(row_major[i] >> 8);
        bytes[2 * i + 1] = static_cast<std::uint8_t>(row_major[i] & 0xff);
    }
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = bytes.data() + static_cast<std::size_t>(y) * width * 2;
    write_png(path, width, height, 16, rows);
}

}  // namespace obstacle_fusion
