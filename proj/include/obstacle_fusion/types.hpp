#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

#include "obstacle_fusion/errors.hpp"

namespace obstacle_fusion {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vec6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

using Vec2d = Vec2<double>;
using Vec3d = Vec3<double>;
using Vec6d = Vec6<double>;
using Mat3d = Mat3<double>;

constexpr double kDegToRad = M_PI / 180.0;
constexpr double kRadToDeg = 180.0 / M_PI;

/// Pinhole intrinsics plus image size, rectified (no distortion model).
template <typename Scalar>
struct CameraModel {
    Scalar fx{0}, fy{0};  // focal lengths, pixels
    Scalar cx{0}, cy{0};  // principal point, pixels
    int width{0}, height{0};

    bool contains(Scalar x, Scalar y) const {
        return x >= Scalar(0) && x < Scalar(width) && y >= Scalar(0) && y < Scalar(height);
    }

    void validate() const {
        if (!(fx > Scalar(0)) || !(fy > Scalar(0)))
            throw ConfigError("camera: focal lengths must be positive");
        if (width <= 0 || height <= 0)
            throw ConfigError("camera: image size must be positive");
        if (!(cx >= Scalar(0)) || !(cx < Scalar(width)) || !(cy >= Scalar(0)) ||
            !(cy < Scalar(height)))
            throw ConfigError("camera: principal point outside image");
    }
};

using CameraModeld = CameraModel<double>;

/// Rigid LiDAR-to-camera transform as a 6-vector (nu, omega):
/// translation in meters and axis-angle rotation in radians, |omega| < pi.
template <typename Scalar>
struct ExtrinsicsSE3 {
    Vec3<Scalar> nu = Vec3<Scalar>::Zero();
    Vec3<Scalar> omega = Vec3<Scalar>::Zero();

    Vec6<Scalar> as_vector() const {
        Vec6<Scalar> v;
        v << nu, omega;
        return v;
    }

    static ExtrinsicsSE3 from_vector(const Vec6<Scalar>& v) {
        ExtrinsicsSE3 xi;
        xi.nu = v.template head<3>();
        xi.omega = v.template tail<3>();
        return xi;
    }

    void validate() const {
        if (!nu.allFinite() || !omega.allFinite())
            throw ConfigError("extrinsics: non-finite component");
        if (!(omega.norm() < Scalar(M_PI)))
            throw ConfigError("extrinsics: |omega| must be < pi");
    }
};

using ExtrinsicsSE3d = ExtrinsicsSE3<double>;

/// Sensor pose in the world frame (applies as X_world = R * X_sensor + t).
template <typename Scalar>
struct Pose {
    Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
    Vec3<Scalar> translation = Vec3<Scalar>::Zero();
    int frame_id = -1;

    Vec3<Scalar> apply(const Vec3<Scalar>& x) const { return rotation * x + translation; }

    Pose inverse() const {
        Pose inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(rotation.transpose() * translation);
        inv.frame_id = frame_id;
        return inv;
    }

    /// this o other, i.e. apply `other` first.
    Pose compose(const Pose& other) const {
        Pose out;
        out.rotation = rotation * other.rotation;
        out.translation = rotation * other.translation + translation;
        out.frame_id = other.frame_id;
        return out;
    }

    void validate(Scalar tol = Scalar(1e-9)) const {
        const Mat3<Scalar> residual =
            rotation.transpose() * rotation - Mat3<Scalar>::Identity();
        if (residual.cwiseAbs().maxCoeff() > tol)
            throw ConfigError("pose: rotation is not orthonormal");
        if (std::abs(rotation.determinant() - Scalar(1)) > tol)
            throw ConfigError("pose: rotation determinant is not +1");
    }
};

using Posed = Pose<double>;

}  // namespace obstacle_fusion
