#include "obstacle_fusion/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "obstacle_fusion/se3.hpp"

namespace obstacle_fusion {

void DetectionMemory::push(MemoryEntry entry) {
    if (!entries_.empty() && entry.frame_id <= entries_.back().frame_id)
        throw ConfigError("DetectionMemory: frame ids must be strictly increasing");
    entries_.push_back(std::move(entry));
    while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
}

void update_memory(DetectionMemory& memory, const std::vector<ObstacleSegment>& detections,
                   const GrayImage& image, const std::optional<Posed>& pose, int frame_id,
                   const CameraModeld& camera, const ExtrinsicsSE3d& xi,
                   const TemporalParams& params) {
    MemoryEntry entry;
    entry.frame_id = frame_id;
    entry.pose = pose;
    const int half = params.template_size / 2;
    for (const auto& seg : detections) {
        MemorySegment mem;
        mem.points.reserve(seg.points.size());
        for (const auto& p : seg.points) mem.points.push_back(p.position);

        const ProjectionResult proj = project_points(mem.points, camera, xi);
        if (!proj.pixels.empty()) {
            Vec2d centroid = Vec2d::Zero();
            for (const auto& px : proj.pixels) centroid += Vec2d(px.x, px.y);
            centroid /= static_cast<double>(proj.pixels.size());
            mem.projected_centroid = centroid;
            mem.centroid_valid = true;

            const int cx = static_cast<int>(std::lround(centroid.x()));
            const int cy = static_cast<int>(std::lround(centroid.y()));
            const int x0 = cx - half;
            const int y0 = cy - half;
            if (x0 >= 0 && y0 >= 0 && x0 + params.template_size <= image.width &&
                y0 + params.template_size <= image.height) {
                GrayImage patch(params.template_size, params.template_size);
                for (int y = 0; y < params.template_size; ++y)
                    for (int x = 0; x < params.template_size; ++x)
                        patch.at(x, y) = image.at(x0 + x, y0 + y);
                mem.patch = std::move(patch);
            }
        }
        entry.segments.push_back(std::move(mem));
    }
    memory.push(std::move(entry));
}

namespace {

/// Relative transform taking points from the entry's sensor frame into the
/// current one.
Posed relative_pose(const Posed& current, const Posed& past) {
    return current.inverse().compose(past);
}

std::vector<Vec3d> transform_points(const std::vector<Vec3d>& points, const Posed& transform) {
    std::vector<Vec3d> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(transform.apply(p));
    return out;
}

}  // namespace

ForwardProjection forward_project(const DetectionMemory& memory, const Posed& current_pose,
                                  const CameraModeld& camera, const ExtrinsicsSE3d& xi) {
    ForwardProjection out;
    for (const auto& entry : memory.entries()) {
        if (!entry.pose) {
            ++out.entries_without_pose;
            continue;
        }
        const Posed rel = relative_pose(current_pose, *entry.pose);
        for (const auto& seg : entry.segments) {
            const ProjectionResult proj =
                project_points(transform_points(seg.points, rel), camera, xi);
            out.culled += proj.culled;
            out.anchors.insert(out.anchors.end(), proj.pixels.begin(), proj.pixels.end());
        }
    }
    return out;
}

MatchResult template_match(const GrayImage& templ, const GrayImage& image,
                           const Vec2d& search_center, int search_radius,
                           double accept_threshold) {
    const int tw = templ.width;
    const int th = templ.height;
    if (tw <= 0 || th <= 0 || tw > image.width || th > image.height)
        throw ConfigError("template_match: template does not fit inside the image");

    double t_mean = 0.0;
    for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x) t_mean += templ.at(x, y);
    t_mean /= tw * th;
    double t_var = 0.0;
    for (int y = 0; y < th; ++y) {
        for (int x = 0; x < tw; ++x) {
            const double d = templ.at(x, y) - t_mean;
            t_var += d * d;
        }
    }
    if (t_var <= 0.0) throw NumericError("template_match: zero-variance template");

    // Candidate top-left corners keeping the patch center within the search
    // radius and the patch inside the image.
    const double center_off_x = (tw - 1) / 2.0;
    const double center_off_y = (th - 1) / 2.0;
    const int x_lo = std::max(0, static_cast<int>(std::ceil(search_center.x() - search_radius -
                                                            center_off_x)));
    const int x_hi = std::min(image.width - tw, static_cast<int>(std::floor(
                                                    search_center.x() + search_radius -
                                                    center_off_x)));
    const int y_lo = std::max(0, static_cast<int>(std::ceil(search_center.y() - search_radius -
                                                            center_off_y)));
    const int y_hi = std::min(image.height - th, static_cast<int>(std::floor(
                                                     search_center.y() + search_radius -
                                                     center_off_y)));
    if (x_lo > x_hi || y_lo > y_hi)
        throw ConfigError("template_match: search window is empty after clipping");

    MatchResult best;
    best.score = -std::numeric_limits<double>::infinity();
    bool any_window = false;
    for (int ty = y_lo; ty <= y_hi; ++ty) {
        for (int tx = x_lo; tx <= x_hi; ++tx) {
            double w_mean = 0.0;
            for (int y = 0; y < th; ++y)
                for (int x = 0; x < tw; ++x) w_mean += image.at(tx + x, ty + y);
            w_mean /= tw * th;
            double cross = 0.0;
            double w_var = 0.0;
            for (int y = 0; y < th; ++y) {
                for (int x = 0; x < tw; ++x) {
                    const double dt = templ.at(x, y) - t_mean;
                    const double dw = image.at(tx + x, ty + y) - w_mean;
                    cross += dt * dw;
                    w_var += dw * dw;
                }
            }
            if (w_var <= 0.0) continue;  // flat window, correlation undefined
            any_window = true;
            const double score = cross / std::sqrt(t_var * w_var);
            if (score > best.score) {
                best.score = score;
                best.center = Vec2d(tx + center_off_x, ty + center_off_y);
            }
        }
    }
    if (!any_window)
        throw NumericError("template_match: every candidate window has zero variance");
    best.accepted = best.score >= accept_threshold;
    return best;
}

AggregationResult propagate_and_aggregate(const ConfidenceMap& current_map,
                                          const DetectionMemory& memory,
                                          const GrayImage& current_image,
                                          const Posed& current_pose,
                                          const std::vector<PixelPoint>& current_anchors,
                                          const CameraModeld& camera, const ExtrinsicsSE3d& xi,
                                          double sigma, const TemporalParams& params) {
    AggregationResult result;
    result.map = current_map;
    for (const auto& entry : memory.entries()) {
        if (!entry.pose) {
            ++result.entries_without_pose;
            continue;
        }
        const Posed rel = relative_pose(current_pose, *entry.pose);
        for (const auto& seg : entry.segments) {
            const ProjectionResult proj =
                project_points(transform_points(seg.points, rel), camera, xi);
            if (proj.pixels.empty()) continue;  // behind the camera now
            Vec2d seed = Vec2d::Zero();
            for (const auto& px : proj.pixels) seed += Vec2d(px.x, px.y);
            seed /= static_cast<double>(proj.pixels.size());

            bool redetected = false;
            for (const auto& anchor : current_anchors) {
                if ((Vec2d(anchor.x, anchor.y) - seed).norm() <= params.merge_radius_px) {
                    redetected = true;
                    break;
                }
            }
            if (redetected) {
                ++result.skipped_redetected;
                continue;
            }
            if (!seg.patch) {
                ++result.skipped_no_template;
                continue;
            }
            MatchResult match;
            try {
                match = template_match(*seg.patch, current_image, seed, params.search_radius,
                                       params.ncc_threshold);
            } catch (const NumericError&) {
                ++result.degenerate_matches;
                continue;
            }
            if (match.accepted) {
                splat_gaussian_max(result.map, match.center.x(), match.center.y(), sigma);
                ++result.matched;
            }
        }
    }
    return result;
}

}  // namespace obstacle_fusion
