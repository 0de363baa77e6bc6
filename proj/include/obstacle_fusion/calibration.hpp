#pragma once

#include <functional>
#include <string>
#include <vector>

#include "obstacle_fusion/distance_transform.hpp"
#include "obstacle_fusion/image.hpp"
#include "obstacle_fusion/types.hpp"

namespace obstacle_fusion {

/// Directed Hausdorff distance between 2D point sets:
///   d(P1, P2) = sup_{x in P1} inf_{y in P2} |x - y|
/// Zero iff P1 is contained in P2; not symmetric. Throws NumericError on an
/// empty set.
double directed_hausdorff(const std::vector<Vec2d>& p1, const std::vector<Vec2d>& p2);

/// One annotated frame for extrinsics refinement: LiDAR points on small
/// obstacles and the annotated obstacle pixels as a distance field.
struct CalibrationFrame {
    int frame_id = 0;
    std::vector<Vec3d> obstacle_points;  // sensor frame, meters
    MaskDistanceField obstacle_field;    // label-2 region of the frame's mask

    CalibrationFrame(int id, std::vector<Vec3d> points, const SegmentationMask& mask);
};

/// Mean over frames of the directed Hausdorff distance from the projected
/// obstacle points to the annotated obstacle region. The per-point inf is
/// evaluated against the pixel-square union of the annotation, so the loss
/// is exactly zero once every projection lands inside it and varies
/// continuously under sub-pixel motion. Throws NumericError when a frame's
/// points all project behind the camera.
double hausdorff_loss(const ExtrinsicsSE3d& xi, const std::vector<CalibrationFrame>& frames,
                      const CameraModeld& camera);

/// Central-difference steps, meters for nu and radians for omega.
struct GradientSteps {
    Vec6d h = (Vec6d() << 1e-4, 1e-4, 1e-4, 1e-5, 1e-5, 1e-5).finished();
};

/// Central differences of an arbitrary scalar function over the 6-vector
/// (nu, omega). Throws NumericError naming the coordinate if a probe is
/// non-finite.
Vec6d numeric_gradient(const std::function<double(const Vec6d&)>& f, const Vec6d& xi,
                       const Vec6d& h);

Vec6d numeric_gradient(const ExtrinsicsSE3d& xi, const std::vector<CalibrationFrame>& frames,
                       const CameraModeld& camera, const GradientSteps& steps = {});

struct RefinementParams {
    double lr = 1e-5;
    int max_iters = 20000;
    double tol = 1e-9;  // stop when the loss drops below this
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double plateau_improvement = 1e-9;
    int plateau_window = 50;
    GradientSteps gradient_steps;
};

struct RefinementReport {
    ExtrinsicsSE3d initial_xi;
    ExtrinsicsSE3d final_xi;
    std::vector<double> loss_trace;  // one entry per evaluation, initial first
    int iterations = 0;
    bool converged = false;

    double initial_loss() const { return loss_trace.front(); }
    double final_loss() const; // loss at final_xi (best seen)
};

/// Adam over the 6 extrinsic parameters with finite-difference gradients of
/// hausdorff_loss. Deterministic; returns the best iterate seen, so the
/// final loss never exceeds the initial one.
RefinementReport refine_extrinsics(const ExtrinsicsSE3d& xi0,
                                   const std::vector<CalibrationFrame>& frames,
                                   const CameraModeld& camera,
                                   const RefinementParams& params = {});

/// Plain-text trace, one "iteration loss" line per entry.
void save_refinement_trace(const RefinementReport& report, const std::string& path);

}  // namespace obstacle_fusion
