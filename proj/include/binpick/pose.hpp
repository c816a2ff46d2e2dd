#pragma once

#include "binpick/common.hpp"
#include "binpick/rng.hpp"

namespace binpick {

// Rigid transform: p' = rotation * p + translation.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Vec3 apply_vector(const Vec3& v) const { return rotation * v; }

    Pose compose(const Pose& other) const {
        // this ∘ other: apply other first.
        return Pose{rotation * other.rotation, rotation * other.translation + translation};
    }

    Pose inverse() const {
        Mat3 rt = rotation.transpose();
        return Pose{rt, -(rt * translation)};
    }

    bool is_valid(double tol = 1e-9) const {
        Mat3 should_be_identity = rotation * rotation.transpose();
        if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
        return std::abs(rotation.determinant() - 1.0) <= tol;
    }
};

// Rotation angle of Ra^T * Rb in [0, pi]. Quaternion form: well-conditioned
// at both ends of the range, unlike acos of the trace.
inline double rotation_angle_between(const Mat3& ra, const Mat3& rb) {
    Quat q(ra.transpose() * rb);
    return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

inline Mat3 rotation_about_x(double angle) {
    double c = std::cos(angle), s = std::sin(angle);
    Mat3 r;
    r << 1, 0, 0,
         0, c, -s,
         0, s, c;
    return r;
}

inline Mat3 rotation_about_axis(const Vec3& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

inline Pose random_pose(Rng& rng, const Vec3& t_lo, const Vec3& t_hi) {
    Pose p;
    p.rotation = rng.uniform_quaternion().toRotationMatrix();
    p.translation = Vec3(rng.uniform(t_lo.x(), t_hi.x()),
                         rng.uniform(t_lo.y(), t_hi.y()),
                         rng.uniform(t_lo.z(), t_hi.z()));
    return p;
}

} // namespace binpick
