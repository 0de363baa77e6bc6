#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "obstacle_fusion/image.hpp"

namespace obstacle_fusion {

/// Pixel coordinates of one connected component.
struct Instance {
    std::vector<std::pair<int, int>> pixels;  // (x, y)
};

/// 8-connected components of one label, ordered by row-major first pixel.
struct InstanceSet {
    int width = 0;
    int height = 0;
    std::vector<Instance> instances;
    /// Per-pixel instance index, -1 where none.
    std::vector<std::int32_t> id_map;

    std::int32_t id_at(int x, int y) const {
        return id_map[static_cast<std::size_t>(y) * width + x];
    }
};

InstanceSet extract_instances(const SegmentationMask& mask, MaskLabel label, int min_area);

/// Instance matching for one frame. A predicted instance is a true positive
/// when more than `overlap_threshold` of its pixels fall on a single ground
/// truth instance; it is a false positive only when it touches no ground
/// truth pixel at all. A ground truth instance counts as detected when any
/// true-positive prediction intersects it.
struct InstanceMatchStats {
    int true_positives = 0;
    int false_positives = 0;
    std::vector<bool> gt_detected;   // per gt instance
    std::vector<bool> pred_is_tp;    // per predicted instance
};

InstanceMatchStats match_instances(const InstanceSet& pred, const InstanceSet& gt,
                                   double overlap_threshold);

struct MetricsParams {
    int min_area = 3;
    double overlap_threshold = 0.2;
};

/// Dataset-pooled counts and the derived IDR / iFDR / PDR / mIoU fractions.
/// Undefined ratios (no ground truth instances, no predictions, an absent
/// class) are reported as NaN with the matching flag cleared; mIoU averages
/// the defined classes only.
struct MetricsReport {
    // instance level
    long total_gt_instances = 0;
    long detected_gt_instances = 0;
    long total_pred_instances = 0;
    long tp_instances = 0;
    long fp_instances = 0;
    // pixel level, per class {off-road, road, small-obstacle}
    std::array<long, 3> tpx{};
    std::array<long, 3> fpx{};
    std::array<long, 3> fnx{};

    double idr = 0.0;
    double ifdr = 0.0;
    double pdr = 0.0;
    std::array<double, 3> iou{};
    double miou = 0.0;
    bool idr_defined = false;
    bool ifdr_defined = false;
    bool pdr_defined = false;
};

MetricsReport evaluate(const std::vector<SegmentationMask>& pred_masks,
                       const std::vector<SegmentationMask>& gt_masks,
                       const MetricsParams& params = {});

/// Fixed-order `name value` table of every report field.
std::string format_metrics_report(const MetricsReport& report);
void save_metrics_report(const MetricsReport& report, const std::string& path);

}  // namespace obstacle_fusion
