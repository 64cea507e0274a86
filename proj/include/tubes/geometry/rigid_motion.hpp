#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace tubes::geometry {

/// Proper rigid motion x -> R*x + t.
struct RigidMotion {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static RigidMotion identity() { return {}; }

    static RigidMotion from_translation(const Eigen::Vector3d &t) {
        return {Eigen::Matrix3d::Identity(), t};
    }

    Eigen::Vector3d apply(const Eigen::Vector3d &p) const { return rotation * p + translation; }

    RigidMotion inverse() const {
        RigidMotion inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(inv.rotation * translation);
        return inv;
    }

    /// Composition: (a.compose(b)).apply(x) == a.apply(b.apply(x)).
    RigidMotion compose(const RigidMotion &other) const {
        RigidMotion out;
        out.rotation = rotation * other.rotation;
        out.translation = rotation * other.translation + translation;
        return out;
    }

    bool is_orthonormal(double tol = 1e-9) const {
        const Eigen::Matrix3d err = rotation * rotation.transpose() - Eigen::Matrix3d::Identity();
        return err.cwiseAbs().maxCoeff() <= tol && rotation.determinant() > 0.0;
    }
};

inline Eigen::Matrix3d axis_angle_to_rotation(const Eigen::Vector3d &axis_angle) {
    const double angle = axis_angle.norm();
    if (angle < 1e-14) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

inline Eigen::Vector3d rotation_to_axis_angle(const Eigen::Matrix3d &rotation) {
    const Eigen::AngleAxisd aa(rotation);
    return aa.angle() * aa.axis();
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d &v) {
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

}  // namespace tubes::geometry
