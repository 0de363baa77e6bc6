#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "obstacle_fusion/se3.hpp"
#include "obstacle_fusion/types.hpp"

namespace obstacle_fusion {

/// Continuous pixel location of a projected 3D point.
struct PixelPoint {
    double x = 0.0;
    double y = 0.0;
    int segment_id = 0;
    bool inside = false;
};

struct ProjectionResult {
    std::vector<PixelPoint> pixels;
    int culled = 0;  // points behind the near plane
};

/// Near-plane depth; points with camera-frame z below this are culled.
inline constexpr double kProjectionZMin = 0.1;

/// Pinhole projection of a camera-frame point. Caller guarantees z > 0.
template <typename Scalar>
Vec2<Scalar> project_camera_point(const Vec3<Scalar>& p_cam, const CameraModel<Scalar>& camera) {
    return {camera.fx * p_cam.x() / p_cam.z() + camera.cx,
            camera.fy * p_cam.y() / p_cam.z() + camera.cy};
}

/// Projects LiDAR-frame points into the image. Points with camera depth
/// below kProjectionZMin are culled and counted, never emitted.
inline ProjectionResult project_points(const std::vector<Vec3d>& points,
                                       const CameraModeld& camera,
                                       const ExtrinsicsSE3d& xi,
                                       int segment_id = 0) {
    ProjectionResult out;
    out.pixels.reserve(points.size());
    const Mat3d rotation = exp_so3(xi.omega);
    for (const auto& x : points) {
        const Vec3d p_cam = rotation * x + xi.nu;
        if (!(p_cam.z() > kProjectionZMin)) {
            ++out.culled;
            continue;
        }
        const Vec2d uv = project_camera_point(p_cam, camera);
        out.pixels.push_back({uv.x(), uv.y(), segment_id, camera.contains(uv.x(), uv.y())});
    }
    return out;
}

/// Per-pixel obstacle confidence in [0,1] at image resolution.
struct ConfidenceMap {
    int width = 0;
    int height = 0;
    Eigen::ArrayXXd values;  // (height, width)

    ConfidenceMap() = default;
    ConfidenceMap(int w, int h) : width(w), height(h), values(Eigen::ArrayXXd::Zero(h, w)) {}

    double at(int x, int y) const { return values(y, x); }
    double& at(int x, int y) { return values(y, x); }
};

/// Max-composes one unit-height Gaussian splat into the map, truncated at
/// radius 3*sigma (tail below 0.012). The pixel nearest the center is pinned
/// to exactly 1 when in bounds.
inline void splat_gaussian_max(ConfidenceMap& map, double cx, double cy, double sigma) {
    if (!(sigma > 0.0)) throw NumericError("splat_gaussian_max: sigma must be positive");
    const double radius = 3.0 * sigma;
    const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    const int x0 = std::max(0, static_cast<int>(std::ceil(cx - radius)));
    const int x1 = std::min(map.width - 1, static_cast<int>(std::floor(cx + radius)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(cy - radius)));
    const int y1 = std::min(map.height - 1, static_cast<int>(std::floor(cy + radius)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            const double dist_sq = dx * dx + dy * dy;
            if (dist_sq > radius * radius) continue;
            const double v = std::exp(-dist_sq * inv_two_sigma_sq);
            if (v > map.values(y, x)) map.values(y, x) = v;
        }
    }
    const int ax = static_cast<int>(std::lround(cx));
    const int ay = static_cast<int>(std::lround(cy));
    if (ax >= 0 && ax < map.width && ay >= 0 && ay < map.height) map.values(ay, ax) = 1.0;
}

/// Renders anchors as a max-composition of unit-height Gaussians:
///   value(p) = max_a exp(-|p - a|^2 / (2 sigma^2))
/// exactly 1 at each in-bounds anchor pixel, zero map without anchors.
inline ConfidenceMap render_confidence_map(const std::vector<PixelPoint>& anchors,
                                           double sigma, const CameraModeld& camera) {
    ConfidenceMap map(camera.width, camera.height);
    if (!(sigma > 0.0)) throw NumericError("render_confidence_map: sigma must be positive");
    for (const auto& a : anchors) splat_gaussian_max(map, a.x, a.y, sigma);
    return map;
}

/// Pixelwise max of two maps of equal size.
inline void max_compose(ConfidenceMap& target, const ConfidenceMap& other) {
    target.values = target.values.max(other.values);
}

}  // namespace obstacle_fusion
