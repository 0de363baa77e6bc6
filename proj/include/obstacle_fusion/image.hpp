#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace obstacle_fusion {

/// 8-bit single-channel raster, (height, width) storage.
struct GrayImage {
    int width = 0;
    int height = 0;
    Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> pixels;

    GrayImage() = default;
    GrayImage(int w, int h)
        : width(w), height(h),
          pixels(Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(h, w)) {}

    std::uint8_t at(int x, int y) const { return pixels(y, x); }
    std::uint8_t& at(int x, int y) { return pixels(y, x); }
    bool contains(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

/// Per-pixel 3-class labels.
enum class MaskLabel : std::uint8_t { kOffRoad = 0, kRoad = 1, kSmallObstacle = 2 };

/// Label raster over {0 = off-road, 1 = road, 2 = small-obstacle}.
struct SegmentationMask {
    int width = 0;
    int height = 0;
    Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> labels;

    SegmentationMask() = default;
    SegmentationMask(int w, int h)
        : width(w), height(h),
          labels(Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(h, w)) {}

    std::uint8_t at(int x, int y) const { return labels(y, x); }
    std::uint8_t& at(int x, int y) { return labels(y, x); }
    bool contains(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    std::size_t count(MaskLabel label) const {
        return (labels == static_cast<std::uint8_t>(label)).count();
    }
};

}  // namespace obstacle_fusion
