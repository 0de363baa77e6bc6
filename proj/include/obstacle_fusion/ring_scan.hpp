#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <vector>

#include "obstacle_fusion/types.hpp"

namespace obstacle_fusion {

inline constexpr int kNumRings = 16;

/// One LiDAR return. `position` is in the sensor frame (x right, y forward,
/// z up); `azimuth_deg` is measured from +x toward +y, so straight ahead is 90.
struct RingPoint {
    double azimuth_deg = 0.0;
    double range_m = 0.0;
    Vec3d position = Vec3d::Zero();
};

/// One sweep organized as 16 rings sorted by ascending azimuth.
struct RingScan {
    std::array<std::vector<RingPoint>, kNumRings> rings;
    /// Per-ring beam elevation, degrees in [-15, 15].
    std::array<double, kNumRings> ring_elevation_deg{};

    std::size_t total_points() const {
        std::size_t n = 0;
        for (const auto& ring : rings) n += ring.size();
        return n;
    }
};

/// A depth discontinuity: measured range at `point_index` deviates from the
/// collinear prediction by at least the detection threshold.
struct Breakpoint {
    int ring = 0;
    int point_index = 0;  // index of the flagged point (the i+2 of its triplet)
    double azimuth_deg = 0.0;
    int gradient_sign = 0;  // sign(measured - predicted), -1 or +1
};

/// Contiguous ring points bracketed by a (-, +) breakpoint pair.
struct ObstacleSegment {
    int ring = 0;
    Breakpoint entry;  // gradient -1
    Breakpoint exit;   // gradient +1
    std::vector<RingPoint> points;  // azimuth in [entry, exit], inclusive

    double spread_deg() const { return exit.azimuth_deg - entry.azimuth_deg; }

    double min_range() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& p : points) m = std::min(m, p.range_m);
        return m;
    }

    Vec3d centroid() const {
        Vec3d c = Vec3d::Zero();
        for (const auto& p : points) c += p.position;
        return points.empty() ? c : Vec3d(c / static_cast<double>(points.size()));
    }
};

}  // namespace obstacle_fusion
