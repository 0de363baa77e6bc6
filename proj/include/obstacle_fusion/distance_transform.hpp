#pragma once

#include <cstdint>
#include <vector>

#include "obstacle_fusion/image.hpp"

namespace obstacle_fusion {

/// Exact Euclidean nearest-site map over a binary raster: for every pixel,
/// the coordinates of the closest seed pixel (two-pass lower-envelope
/// transform, squared distances).
struct NearestSiteMap {
    int width = 0;
    int height = 0;
    bool has_sites = false;
    std::vector<std::int32_t> site_x;  // row-major
    std::vector<std::int32_t> site_y;

    std::int32_t nearest_x(int x, int y) const {
        return site_x[static_cast<std::size_t>(y) * width + x];
    }
    std::int32_t nearest_y(int x, int y) const {
        return site_y[static_cast<std::size_t>(y) * width + x];
    }
};

NearestSiteMap build_nearest_sites(const SegmentationMask& mask, MaskLabel label);

/// Continuous distance from a query point to the region covered by pixels of
/// one label, each pixel taken as its unit square. Zero anywhere inside the
/// region (in particular at every labeled pixel center), smooth outside, and
/// well defined for queries beyond the image bounds.
class MaskDistanceField {
public:
    MaskDistanceField() = default;
    MaskDistanceField(const SegmentationMask& mask, MaskLabel label);

    bool empty() const { return !sites_.has_sites; }
    int width() const { return sites_.width; }
    int height() const { return sites_.height; }

    double distance(double x, double y) const;

private:
    NearestSiteMap sites_;
};

}  // namespace obstacle_fusion
