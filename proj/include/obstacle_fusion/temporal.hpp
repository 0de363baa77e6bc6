#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "obstacle_fusion/image.hpp"
#include "obstacle_fusion/projection.hpp"
#include "obstacle_fusion/ring_scan.hpp"
#include "obstacle_fusion/types.hpp"

namespace obstacle_fusion {

struct TemporalParams {
    int k = 4;                  // frames of history
    int template_size = 32;     // square patch side, pixels
    int search_radius = 48;     // around the odometry seed, pixels
    double ncc_threshold = 0.6; // acceptance score
    double merge_radius_px = 10.0;  // re-detection suppression radius
};

/// One remembered detection: its 3D points at capture time, where they
/// projected, and an appearance patch when one could be cut.
struct MemorySegment {
    std::vector<Vec3d> points;  // sensor frame of the capture frame
    Vec2d projected_centroid = Vec2d::Zero();
    bool centroid_valid = false;
    std::optional<GrayImage> patch;
};

struct MemoryEntry {
    int frame_id = -1;
    std::optional<Posed> pose;
    std::vector<MemorySegment> segments;
};

/// Ring buffer of the last k frames' detections.
class DetectionMemory {
public:
    explicit DetectionMemory(int k = 4) : capacity_(k) {}

    const std::deque<MemoryEntry>& entries() const { return entries_; }
    int capacity() const { return capacity_; }
    bool empty() const { return entries_.empty(); }

    /// Appends one frame entry and evicts beyond capacity. Frame ids must
    /// be strictly increasing.
    void push(MemoryEntry entry);

private:
    int capacity_;
    std::deque<MemoryEntry> entries_;
};

/// Records this frame's detections: each segment's points, its projected
/// centroid, and a template patch cut around the centroid when the full
/// patch fits inside the image.
void update_memory(DetectionMemory& memory, const std::vector<ObstacleSegment>& detections,
                   const GrayImage& image, const std::optional<Posed>& pose, int frame_id,
                   const CameraModeld& camera, const ExtrinsicsSE3d& xi,
                   const TemporalParams& params);

struct ForwardProjection {
    std::vector<PixelPoint> anchors;
    int culled = 0;
    int entries_without_pose = 0;
};

/// Projects every remembered 3D segment into the current frame through the
/// relative pose (current^-1 o past); entries lacking a pose are skipped
/// and counted.
ForwardProjection forward_project(const DetectionMemory& memory, const Posed& current_pose,
                                  const CameraModeld& camera, const ExtrinsicsSE3d& xi);

/// Zero-mean normalized cross-correlation match of a patch near a seed.
struct MatchResult {
    Vec2d center = Vec2d::Zero();  // matched patch center, pixels
    double score = 0.0;            // in [-1, 1]
    bool accepted = false;
};

/// Exhaustive ZNCC over placements whose center stays within search_radius
/// of search_center, clipped so the template lies inside the image. Throws
/// NumericError when the template (or every candidate window) has zero
/// variance.
MatchResult template_match(const GrayImage& templ, const GrayImage& image,
                           const Vec2d& search_center, int search_radius,
                           double accept_threshold);

struct AggregationResult {
    ConfidenceMap map;
    int matched = 0;
    int skipped_redetected = 0;
    int skipped_no_template = 0;
    int degenerate_matches = 0;
    int entries_without_pose = 0;
};

/// Re-localizes remembered obstacles that the current scan missed: seeds a
/// template search at each segment's forward-projected centroid and, on an
/// accepted match, max-composes a Gaussian splat at the matched center into
/// the current map. Segments whose centroid lands within merge_radius_px of
/// a current anchor are treated as re-detected and skipped.
AggregationResult propagate_and_aggregate(const ConfidenceMap& current_map,
                                          const DetectionMemory& memory,
                                          const GrayImage& current_image,
                                          const Posed& current_pose,
                                          const std::vector<PixelPoint>& current_anchors,
                                          const CameraModeld& camera, const ExtrinsicsSE3d& xi,
                                          double sigma, const TemporalParams& params);

}  // namespace obstacle_fusion
