#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "obstacle_fusion/image.hpp"
#include "obstacle_fusion/ring_scan.hpp"
#include "obstacle_fusion/types.hpp"

namespace obstacle_fusion {

/// Denominator guard for predict_range; below this the ray triplet is
/// treated as tangent to the surface.
inline constexpr double kPredictDenominatorEps = 1e-6;

/// Collinear range prediction for the third ray of a triplet separated by
/// angular step theta:
///   d_p = d_i * d_i1 / (2 d_i cos(theta) - d_i1)
/// Exact whenever the three returns lie on a straight line (any plane seen
/// edge-on by the ring). Throws NumericError on a near-zero or negative
/// denominator.
double predict_range(double d_i, double d_i1, double theta_rad);

struct BreakpointParams {
    double d_th = 0.4;  // meters
};

struct BreakpointResult {
    std::vector<Breakpoint> breakpoints;  // ordered by azimuth
    int degenerate_triplets = 0;          // skipped predict_range singularities
};

/// Flags every point whose measured range deviates from the collinear
/// prediction of its two predecessors by at least d_th. The triplet step
/// theta is the mean measured azimuth difference, (az[i+2] - az[i]) / 2,
/// so dropped returns do not skew the prediction.
BreakpointResult detect_breakpoints(const std::vector<RingPoint>& ring, int ring_index,
                                    const BreakpointParams& params);

/// Pairs breakpoints into small-obstacle segments: a pending -1 gradient is
/// matched against the first +1 that follows; the pair is emitted when its
/// azimuthal spread is positive and at most max_spread_deg. A -1 followed by
/// another -1 restarts the pending breakpoint at the later one.
std::vector<ObstacleSegment> isolate_obstacle_segments(const std::vector<Breakpoint>& breakpoints,
                                                       const std::vector<RingPoint>& ring,
                                                       double max_spread_deg);

struct CurbParams {
    double forward_azimuth_deg = 90.0;
    double elevation_jump_m = 0.1;
    /// Elevated stretches narrower than this are treated as on-road obstacles
    /// rather than curbs and do not close the band.
    double min_obstruction_width_deg = 2.5;
};

/// Closed azimuth interval, degrees.
struct AzimuthBand {
    double lo_deg = 0.0;
    double hi_deg = 360.0;
    bool contains(double az) const { return az >= lo_deg && az <= hi_deg; }
};

/// Walks outward from the forward azimuth and closes the band at the first
/// persistent rise of elevation_jump_m above the forward road level (a curb).
/// Returns the whole ring span when no curb is found, std::nullopt for rings
/// with no points.
std::optional<AzimuthBand> detect_road_band(const std::vector<RingPoint>& ring,
                                            const CurbParams& params);

/// Road region: either per-ring curb-derived azimuth bands or an image-space
/// road mask to test segment projections against.
struct RoadRegion {
    struct AzimuthBands {
        std::array<std::optional<AzimuthBand>, kNumRings> bands;
    };
    struct MaskRegion {
        SegmentationMask mask;
    };
    std::variant<AzimuthBands, MaskRegion> region;

    static RoadRegion from_bands(AzimuthBands b) { return {std::move(b)}; }
    static RoadRegion from_mask(SegmentationMask m) { return {MaskRegion{std::move(m)}}; }
};

/// Per-ring curb bands for a whole scan.
RoadRegion::AzimuthBands detect_road_region(const RingScan& scan, const CurbParams& params);

/// Keeps segments on the road. Azimuth variant: the segment interval must lie
/// inside its ring's band (rings without a band keep everything). Mask
/// variant: at least half of the member points must project onto pixels
/// labeled road or small-obstacle; requires camera and extrinsics.
std::vector<ObstacleSegment> filter_segments_by_road(
    const std::vector<ObstacleSegment>& segments, const RoadRegion& road,
    const CameraModeld* camera = nullptr, const ExtrinsicsSE3d* xi = nullptr);

struct DetectParams {
    double d_th = 0.4;           // meters
    double max_spread_deg = 2.0; // small-obstacle azimuthal spread bound
    std::optional<RoadRegion> road;
    const CameraModeld* camera = nullptr;  // for the mask road variant
    const ExtrinsicsSE3d* xi = nullptr;
};

struct DetectResult {
    std::vector<ObstacleSegment> segments;
    int degenerate_triplets = 0;
};

/// Per-ring breakpoint detection, segment isolation and road filtering,
/// concatenated over all rings. Deterministic.
DetectResult detect_scan(const RingScan& scan, const DetectParams& params);

/// Text report, one `ring azA azB n_points spread_deg min_range` line per
/// segment.
std::string format_segment_report(const std::vector<ObstacleSegment>& segments);
void save_segment_report(const std::vector<ObstacleSegment>& segments, const std::string& path);

}  // namespace obstacle_fusion
