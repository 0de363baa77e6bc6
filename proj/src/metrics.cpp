#include "obstacle_fusion/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "obstacle_fusion/errors.hpp"

namespace obstacle_fusion {

InstanceSet extract_instances(const SegmentationMask& mask, MaskLabel label, int min_area) {
    InstanceSet out;
    out.width = mask.width;
    out.height = mask.height;
    out.id_map.assign(static_cast<std::size_t>(mask.width) * mask.height, -1);
    const auto target = static_cast<std::uint8_t>(label);

    std::vector<std::int32_t> component(out.id_map.size(), -1);
    std::vector<Instance> components;
    std::vector<std::pair<int, int>> stack;
    for (int y0 = 0; y0 < mask.height; ++y0) {
        for (int x0 = 0; x0 < mask.width; ++x0) {
            const std::size_t idx0 = static_cast<std::size_t>(y0) * mask.width + x0;
            if (mask.at(x0, y0) != target || component[idx0] >= 0) continue;
            const auto id = static_cast<std::int32_t>(components.size());
            Instance instance;
            stack.assign(1, {x0, y0});
            component[idx0] = id;
            while (!stack.empty()) {
                const auto [x, y] = stack.back();
                stack.pop_back();
                instance.pixels.emplace_back(x, y);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx;
                        const int ny = y + dy;
                        if ((dx == 0 && dy == 0) || !mask.contains(nx, ny)) continue;
                        const std::size_t nidx = static_cast<std::size_t>(ny) * mask.width + nx;
                        if (mask.at(nx, ny) != target || component[nidx] >= 0) continue;
                        component[nidx] = id;
                        stack.push_back({nx, ny});
                    }
                }
            }
            components.push_back(std::move(instance));
        }
    }

    for (auto& instance : components) {
        if (static_cast<int>(instance.pixels.size()) < min_area) continue;
        const auto id = static_cast<std::int32_t>(out.instances.size());
        for (const auto& [x, y] : instance.pixels)
            out.id_map[static_cast<std::size_t>(y) * mask.width + x] = id;
        out.instances.push_back(std::move(instance));
    }
    return out;
}

InstanceMatchStats match_instances(const InstanceSet& pred, const InstanceSet& gt,
                                   double overlap_threshold) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw ConfigError("match_instances: mask dimensions differ");
    InstanceMatchStats stats;
    stats.gt_detected.assign(gt.instances.size(), false);
    stats.pred_is_tp.assign(pred.instances.size(), false);

    for (std::size_t p = 0; p < pred.instances.size(); ++p) {
        const auto& instance = pred.instances[p];
        std::vector<long> overlap(gt.instances.size(), 0);
        bool touches_gt = false;
        for (const auto& [x, y] : instance.pixels) {
            const std::int32_t g = gt.id_at(x, y);
            if (g >= 0) {
                ++overlap[g];
                touches_gt = true;
            }
        }
        bool is_tp = false;
        for (std::size_t g = 0; g < overlap.size(); ++g) {
            if (static_cast<double>(overlap[g]) >
                overlap_threshold * static_cast<double>(instance.pixels.size()))
                is_tp = true;
        }
        if (is_tp) {
            ++stats.true_positives;
            stats.pred_is_tp[p] = true;
            for (std::size_t g = 0; g < overlap.size(); ++g)
                if (overlap[g] > 0) stats.gt_detected[g] = true;
        } else if (!touches_gt) {
            ++stats.false_positives;
        }
    }
    return stats;
}

MetricsReport evaluate(const std::vector<SegmentationMask>& pred_masks,
                       const std::vector<SegmentationMask>& gt_masks,
                       const MetricsParams& params) {
    if (pred_masks.size() != gt_masks.size())
        throw ConfigError("evaluate: prediction and ground truth counts differ");
    MetricsReport report;
    for (std::size_t i = 0; i < pred_masks.size(); ++i) {
        const auto& pred = pred_masks[i];
        const auto& gt = gt_masks[i];
        if (pred.width != gt.width || pred.height != gt.height)
            throw ConfigError("evaluate: mask dimensions differ at frame " + std::to_string(i));

        const InstanceSet pred_instances =
            extract_instances(pred, MaskLabel::kSmallObstacle, params.min_area);
        const InstanceSet gt_instances =
            extract_instances(gt, MaskLabel::kSmallObstacle, params.min_area);
        const InstanceMatchStats stats =
            match_instances(pred_instances, gt_instances, params.overlap_threshold);

        report.total_gt_instances += static_cast<long>(gt_instances.instances.size());
        report.total_pred_instances += static_cast<long>(pred_instances.instances.size());
        report.tp_instances += stats.true_positives;
        report.fp_instances += stats.false_positives;
        report.detected_gt_instances +=
            std::count(stats.gt_detected.begin(), stats.gt_detected.end(), true);

        for (int y = 0; y < gt.height; ++y) {
            for (int x = 0; x < gt.width; ++x) {
                const std::uint8_t p = pred.at(x, y);
                const std::uint8_t g = gt.at(x, y);
                if (p > 2 || g > 2) throw ConfigError("evaluate: label outside {0,1,2}");
                if (p == g) {
                    ++report.tpx[p];
                } else {
                    ++report.fpx[p];
                    ++report.fnx[g];
                }
            }
        }
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.idr_defined = report.total_gt_instances > 0;
    report.idr = report.idr_defined ? static_cast<double>(report.detected_gt_instances) /
                                          static_cast<double>(report.total_gt_instances)
                                    : nan;
    report.ifdr_defined = report.total_pred_instances > 0;
    report.ifdr = report.ifdr_defined ? static_cast<double>(report.fp_instances) /
                                            static_cast<double>(report.total_pred_instances)
                                      : nan;
    const long gt_obstacle_px = report.tpx[2] + report.fnx[2];
    report.pdr_defined = gt_obstacle_px > 0;
    report.pdr = report.pdr_defined
                     ? static_cast<double>(report.tpx[2]) / static_cast<double>(gt_obstacle_px)
                     : nan;

    double iou_sum = 0.0;
    int iou_classes = 0;
    for (int c = 0; c < 3; ++c) {
        const long denom = report.tpx[c] + report.fpx[c] + report.fnx[c];
        if (denom > 0) {
            report.iou[c] = static_cast<double>(report.tpx[c]) / static_cast<double>(denom);
            iou_sum += report.iou[c];
            ++iou_classes;
        } else {
            report.iou[c] = nan;  // class absent from both rasters
        }
    }
    report.miou = iou_classes > 0 ? iou_sum / iou_classes : nan;
    return report;
}

std::string format_metrics_report(const MetricsReport& report) {
    char buf[96];
    std::string out;
    auto put_long = [&](const char* name, long v) {
        std::snprintf(buf, sizeof(buf), "%s %ld\n", name, v);
        out += buf;
    };
    auto put_frac = [&](const char* name, double v) {
        std::snprintf(buf, sizeof(buf), "%s %.6f\n", name, v);
        out += buf;
    };
    put_long("total_gt_instances", report.total_gt_instances);
    put_long("detected_gt_instances", report.detected_gt_instances);
    put_long("total_pred_instances", report.total_pred_instances);
    put_long("tp_instances", report.tp_instances);
    put_long("fp_instances", report.fp_instances);
    put_frac("idr", report.idr);
    put_frac("ifdr", report.ifdr);
    put_frac("pdr", report.pdr);
    put_frac("iou_offroad", report.iou[0]);
    put_frac("iou_road", report.iou[1]);
    put_frac("iou_obstacle", report.iou[2]);
    put_frac("miou", report.miou);
    static const char* const kClasses[] = {"offroad", "road", "obstacle"};
    for (int c = 0; c < 3; ++c) {
        std::snprintf(buf, sizeof(buf), "tpx_%s %ld\nfpx_%s %ld\nfnx_%s %ld\n", kClasses[c],
                      report.tpx[c], kClasses[c], report.fpx[c], kClasses[c], report.fnx[c]);
        out += buf;
    }
    return out;
}

void save_metrics_report(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << format_metrics_report(report);
}

}  // namespace obstacle_fusion
