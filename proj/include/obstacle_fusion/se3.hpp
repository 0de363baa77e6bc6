#pragma once

#include <Eigen/Core>

#include <cmath>

#include "obstacle_fusion/types.hpp"

namespace obstacle_fusion {

/// Skew-symmetric cross-product matrix [w]x.
template <typename Derived>
Mat3<typename Derived::Scalar> skew(const Eigen::MatrixBase<Derived>& w) {
    using Scalar = typename Derived::Scalar;
    Mat3<Scalar> s;
    s << Scalar(0), -w.z(), w.y(),
         w.z(), Scalar(0), -w.x(),
        -w.y(), w.x(), Scalar(0);
    return s;
}

/// Rodrigues exponential map so(3) -> SO(3):
///   R = I + sin|w|/|w| [w]x + (1 - cos|w|)/|w|^2 [w]x^2
/// Falls back to the first-order series below |w| = 1e-8 where the
/// quotients lose precision.
template <typename Derived>
Mat3<typename Derived::Scalar> exp_so3(const Eigen::MatrixBase<Derived>& omega) {
    using Scalar = typename Derived::Scalar;
    EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
    const Scalar theta = omega.norm();
    const Mat3<Scalar> w_hat = skew(omega);
    if (theta < Scalar(1e-8)) {
        return Mat3<Scalar>::Identity() + w_hat + Scalar(0.5) * w_hat * w_hat;
    }
    const Scalar a = std::sin(theta) / theta;
    const Scalar b = (Scalar(1) - std::cos(theta)) / (theta * theta);
    return Mat3<Scalar>::Identity() + a * w_hat + b * w_hat * w_hat;
}

/// Geodesic angle (radians) between two rotations.
template <typename Scalar>
Scalar rotation_geodesic_angle(const Mat3<Scalar>& r_a, const Mat3<Scalar>& r_b) {
    const Scalar trace = (r_a.transpose() * r_b).trace();
    const Scalar c = std::min(Scalar(1), std::max(Scalar(-1), (trace - Scalar(1)) / Scalar(2)));
    return std::acos(c);
}

/// LiDAR point expressed in the camera frame under extrinsics xi.
template <typename Scalar>
Vec3<Scalar> lidar_to_camera(const Vec3<Scalar>& x, const ExtrinsicsSE3<Scalar>& xi) {
    return exp_so3(xi.omega) * x + xi.nu;
}

}  // namespace obstacle_fusion
