#include "obstacle_fusion/ring_geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "obstacle_fusion/projection.hpp"

namespace obstacle_fusion {

double predict_range(double d_i, double d_i1, double theta_rad) {
    if (!(d_i > 0.0) || !(d_i1 > 0.0))
        throw NumericError("predict_range: ranges must be positive");
    const double denominator = 2.0 * d_i * std::cos(theta_rad) - d_i1;
    if (denominator <= kPredictDenominatorEps)
        throw NumericError("predict_range: degenerate geometry, denominator " +
                           std::to_string(denominator));
    return d_i * d_i1 / denominator;
}

BreakpointResult detect_breakpoints(const std::vector<RingPoint>& ring, int ring_index,
                                    const BreakpointParams& params) {
    BreakpointResult result;
    if (ring.size() < 3) return result;
    if (!(params.d_th > 0.0)) throw ConfigError("detect_breakpoints: d_th must be positive");
    for (std::size_t i = 0; i + 2 < ring.size(); ++i) {
        const RingPoint& p0 = ring[i];
        const RingPoint& p1 = ring[i + 1];
        const RingPoint& p2 = ring[i + 2];
        const double theta = 0.5 * (p2.azimuth_deg - p0.azimuth_deg) * kDegToRad;
        double predicted;
        try {
            predicted = predict_range(p0.range_m, p1.range_m, theta);
        } catch (const NumericError&) {
            ++result.degenerate_triplets;
            continue;
        }
        const double deviation = p2.range_m - predicted;
        if (std::abs(deviation) >= params.d_th) {
            result.breakpoints.push_back({ring_index, static_cast<int>(i + 2), p2.azimuth_deg,
                                          deviation > 0.0 ? +1 : -1});
        }
    }
    return result;
}

std::vector<ObstacleSegment> isolate_obstacle_segments(const std::vector<Breakpoint>& breakpoints,
                                                       const std::vector<RingPoint>& ring,
                                                       double max_spread_deg) {
    std::vector<ObstacleSegment> segments;
    std::optional<Breakpoint> pending;
    for (const Breakpoint& bp : breakpoints) {
        if (bp.gradient_sign < 0) {
            pending = bp;  // a later -1 restarts the pair
            continue;
        }
        if (!pending) continue;
        const double spread = bp.azimuth_deg - pending->azimuth_deg;
        if (spread > 0.0 && spread <= max_spread_deg) {
            ObstacleSegment seg;
            seg.ring = bp.ring;
            seg.entry = *pending;
            seg.exit = bp;
            for (const RingPoint& p : ring) {
                if (p.azimuth_deg >= pending->azimuth_deg && p.azimuth_deg <= bp.azimuth_deg)
                    seg.points.push_back(p);
            }
            segments.push_back(std::move(seg));
        }
        pending.reset();
    }
    return segments;
}

std::optional<AzimuthBand> detect_road_band(const std::vector<RingPoint>& ring,
                                            const CurbParams& params) {
    if (ring.empty()) return std::nullopt;

    // Closest point to the forward azimuth anchors the walk.
    std::size_t fwd = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const double d = std::abs(ring[i].azimuth_deg - params.forward_azimuth_deg);
        if (d < best) {
            best = d;
            fwd = i;
        }
    }
    const double road_z = ring[fwd].position.z();

    // A point is a curb bound if it rises elevation_jump_m above the road
    // level and the rise persists for min_obstruction_width_deg of azimuth;
    // narrower bumps are on-road obstacles and are walked over.
    auto persistent_rise = [&](std::size_t start, int dir) {
        const double az0 = ring[start].azimuth_deg;
        for (std::size_t j = start;; j = static_cast<std::size_t>(static_cast<long>(j) + dir)) {
            if (std::abs(ring[j].azimuth_deg - az0) > params.min_obstruction_width_deg) return true;
            if (ring[j].position.z() - road_z < params.elevation_jump_m) return false;
            if (dir < 0 && j == 0) return true;
            if (dir > 0 && j + 1 == ring.size()) return true;
        }
    };

    AzimuthBand band{ring.front().azimuth_deg, ring.back().azimuth_deg};
    for (std::size_t i = fwd; i + 1 < ring.size(); ++i) {
        if (ring[i + 1].position.z() - road_z >= params.elevation_jump_m &&
            persistent_rise(i + 1, +1)) {
            band.hi_deg = ring[i].azimuth_deg;
            break;
        }
    }
    for (std::size_t i = fwd; i > 0; --i) {
        if (ring[i - 1].position.z() - road_z >= params.elevation_jump_m &&
            persistent_rise(i - 1, -1)) {
            band.lo_deg = ring[i].azimuth_deg;
            break;
        }
    }
    return band;
}

RoadRegion::AzimuthBands detect_road_region(const RingScan& scan, const CurbParams& params) {
    RoadRegion::AzimuthBands bands;
    for (int r = 0; r < kNumRings; ++r) bands.bands[r] = detect_road_band(scan.rings[r], params);
    return bands;
}

namespace {

bool segment_on_road_mask(const ObstacleSegment& seg, const SegmentationMask& mask,
                          const CameraModeld& camera, const ExtrinsicsSE3d& xi) {
    if (seg.points.empty()) return false;
    std::vector<Vec3d> pts;
    pts.reserve(seg.points.size());
    for (const auto& p : seg.points) pts.push_back(p.position);
    const ProjectionResult proj = project_points(pts, camera, xi);
    std::size_t on_road = 0;
    for (const auto& px : proj.pixels) {
        const int x = static_cast<int>(std::lround(px.x));
        const int y = static_cast<int>(std::lround(px.y));
        if (!mask.contains(x, y)) continue;
        const auto label = mask.at(x, y);
        if (label == static_cast<std::uint8_t>(MaskLabel::kRoad) ||
            label == static_cast<std::uint8_t>(MaskLabel::kSmallObstacle))
            ++on_road;
    }
    return 2 * on_road >= seg.points.size();
}

}  // namespace

std::vector<ObstacleSegment> filter_segments_by_road(
    const std::vector<ObstacleSegment>& segments, const RoadRegion& road,
    const CameraModeld* camera, const ExtrinsicsSE3d* xi) {
    std::vector<ObstacleSegment> kept;
    if (const auto* bands = std::get_if<RoadRegion::AzimuthBands>(&road.region)) {
        for (const auto& seg : segments) {
            const auto& band = bands->bands[seg.ring];
            if (!band || (band->contains(seg.entry.azimuth_deg) &&
                          band->contains(seg.exit.azimuth_deg)))
                kept.push_back(seg);
        }
        return kept;
    }
    const auto& mask_region = std::get<RoadRegion::MaskRegion>(road.region);
    if (camera == nullptr || xi == nullptr)
        throw ConfigError("filter_segments_by_road: mask variant needs camera and extrinsics");
    for (const auto& seg : segments) {
        if (segment_on_road_mask(seg, mask_region.mask, *camera, *xi)) kept.push_back(seg);
    }
    return kept;
}

std::string format_segment_report(const std::vector<ObstacleSegment>& segments) {
    std::string out;
    char buf[160];
    for (const auto& seg : segments) {
        std::snprintf(buf, sizeof(buf), "%d %.10g %.10g %zu %.10g %.10g\n", seg.ring,
                      seg.entry.azimuth_deg, seg.exit.azimuth_deg, seg.points.size(),
                      seg.spread_deg(), seg.min_range());
        out += buf;
    }
    return out;
}

void save_segment_report(const std::vector<ObstacleSegment>& segments, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << format_segment_report(segments);
}

DetectResult detect_scan(const RingScan& scan, const DetectParams& params) {
    DetectResult result;
    BreakpointParams bp_params{params.d_th};
    for (int r = 0; r < kNumRings; ++r) {
        const auto& ring = scan.rings[r];
        BreakpointResult bp = detect_breakpoints(ring, r, bp_params);
        result.degenerate_triplets += bp.degenerate_triplets;
        std::vector<ObstacleSegment> segments =
            isolate_obstacle_segments(bp.breakpoints, ring, params.max_spread_deg);
        if (params.road) {
            segments = filter_segments_by_road(segments, *params.road, params.camera, params.xi);
        }
        for (auto& seg : segments) result.segments.push_back(std::move(seg));
    }
    return result;
}

}  // namespace obstacle_fusion
