#include "obstacle_fusion/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "obstacle_fusion/projection.hpp"
#include "obstacle_fusion/se3.hpp"

namespace obstacle_fusion {

double directed_hausdorff(const std::vector<Vec2d>& p1, const std::vector<Vec2d>& p2) {
    if (p1.empty() || p2.empty())
        throw NumericError("directed_hausdorff: sets must be non-empty");
    double worst_sq = 0.0;
    for (const auto& x : p1) {
        double best_sq = std::numeric_limits<double>::infinity();
        for (const auto& y : p2) {
            const double dx = x.x() - y.x();
            const double dy = x.y() - y.y();
            const double d = dx * dx + dy * dy;
            if (d < best_sq) {
                best_sq = d;
                if (best_sq <= worst_sq) break;  // cannot raise the sup
            }
        }
        worst_sq = std::max(worst_sq, best_sq);
    }
    return std::sqrt(worst_sq);
}

CalibrationFrame::CalibrationFrame(int id, std::vector<Vec3d> points,
                                   const SegmentationMask& mask)
    : frame_id(id), obstacle_points(std::move(points)),
      obstacle_field(mask, MaskLabel::kSmallObstacle) {
    if (obstacle_points.empty())
        throw ConfigError("calibration frame " + std::to_string(id) + ": no obstacle points");
    if (obstacle_field.empty())
        throw ConfigError("calibration frame " + std::to_string(id) +
                          ": mask has no small-obstacle pixels");
}

double hausdorff_loss(const ExtrinsicsSE3d& xi, const std::vector<CalibrationFrame>& frames,
                      const CameraModeld& camera) {
    if (frames.empty()) throw ConfigError("hausdorff_loss: no frames");
    double sum = 0.0;
    for (const auto& frame : frames) {
        const ProjectionResult proj = project_points(frame.obstacle_points, camera, xi);
        if (proj.pixels.empty())
            throw NumericError("hausdorff_loss: frame " + std::to_string(frame.frame_id) +
                               " projects no points in front of the camera");
        double frame_sup = 0.0;
        for (const auto& px : proj.pixels)
            frame_sup = std::max(frame_sup, frame.obstacle_field.distance(px.x, px.y));
        sum += frame_sup;
    }
    return sum / static_cast<double>(frames.size());
}

Vec6d numeric_gradient(const std::function<double(const Vec6d&)>& f, const Vec6d& xi,
                       const Vec6d& h) {
    static const char* const kNames[] = {"nu_x", "nu_y", "nu_z", "omega_x", "omega_y", "omega_z"};
    Vec6d grad;
    for (int i = 0; i < 6; ++i) {
        Vec6d probe = xi;
        probe[i] = xi[i] + h[i];
        const double plus = f(probe);
        probe[i] = xi[i] - h[i];
        const double minus = f(probe);
        if (!std::isfinite(plus) || !std::isfinite(minus))
            throw NumericError(std::string("numeric_gradient: non-finite loss probing ") +
                               kNames[i]);
        grad[i] = (plus - minus) / (2.0 * h[i]);
    }
    return grad;
}

Vec6d numeric_gradient(const ExtrinsicsSE3d& xi, const std::vector<CalibrationFrame>& frames,
                       const CameraModeld& camera, const GradientSteps& steps) {
    const auto f = [&](const Vec6d& v) {
        return hausdorff_loss(ExtrinsicsSE3d::from_vector(v), frames, camera);
    };
    return numeric_gradient(f, xi.as_vector(), steps.h);
}

double RefinementReport::final_loss() const {
    double best = loss_trace.front();
    for (double v : loss_trace) best = std::min(best, v);
    return best;
}

RefinementReport refine_extrinsics(const ExtrinsicsSE3d& xi0,
                                   const std::vector<CalibrationFrame>& frames,
                                   const CameraModeld& camera, const RefinementParams& params) {
    if (!(params.lr > 0.0)) throw ConfigError("refine_extrinsics: lr must be positive");
    RefinementReport report;
    report.initial_xi = xi0;
    report.final_xi = xi0;

    Vec6d xi = xi0.as_vector();
    double loss = hausdorff_loss(xi0, frames, camera);
    report.loss_trace.push_back(loss);
    report.iterations = 1;

    double best_loss = loss;
    Vec6d best_xi = xi;
    if (loss < params.tol) {
        report.converged = true;
        return report;
    }

    Vec6d m = Vec6d::Zero();
    Vec6d v = Vec6d::Zero();
    int last_improvement = 0;
    for (int t = 1; t <= params.max_iters; ++t) {
        const auto f = [&](const Vec6d& p) {
            return hausdorff_loss(ExtrinsicsSE3d::from_vector(p), frames, camera);
        };
        const Vec6d grad = numeric_gradient(f, xi, params.gradient_steps.h);

        m = params.beta1 * m + (1.0 - params.beta1) * grad;
        v = params.beta2 * v + (1.0 - params.beta2) * grad.cwiseProduct(grad);
        const Vec6d m_hat = m / (1.0 - std::pow(params.beta1, t));
        const Vec6d v_hat = v / (1.0 - std::pow(params.beta2, t));
        xi -= params.lr * (m_hat.array() / (v_hat.array().sqrt() + params.epsilon)).matrix();

        loss = f(xi);
        report.loss_trace.push_back(loss);
        report.iterations = t + 1;

        if (loss < best_loss - params.plateau_improvement) last_improvement = t;
        if (loss < best_loss) {
            best_loss = loss;
            best_xi = xi;
        }
        if (loss < params.tol) {
            report.converged = true;
            break;
        }
        if (t - last_improvement >= params.plateau_window) {
            report.converged = true;  // settled on a plateau
            break;
        }
    }
    report.final_xi = ExtrinsicsSE3d::from_vector(best_xi);
    return report;
}

void save_refinement_trace(const RefinementReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    char buf[64];
    for (std::size_t i = 0; i < report.loss_trace.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu %.12g\n", i, report.loss_trace[i]);
        out << buf;
    }
}

}  // namespace obstacle_fusion
