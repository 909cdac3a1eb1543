#pragma once

// Rotation construction, gaze composition, binocular fusion and cone
// membership tests. Everything here is a pure function on Eigen dense
// types; the heavier analysis modules build on top of these.
//
// Conventions (documented in docs/trace_format.md):
//   * analysis frame is right-handed, z-up
//   * canonical forward axis of an unrotated headset is +x
//   * yaw rotates about z, pitch about y, roll about x
//   * public APIs take angles in degrees, radians are internal only

#include <Eigen/Dense>

#include <cmath>

#include "vvt/errors.hpp"

namespace vvt {

template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Angular slack used by cone-membership comparisons. Keeps the boundary
// inclusive under acos/atan2 rounding without admitting points that are
// measurably outside the cone.
inline constexpr double kAngularEpsRad = 1e-9;

template <typename Scalar>
constexpr Scalar deg_to_rad(Scalar deg) {
  return deg * Scalar(kPi) / Scalar(180);
}

template <typename Scalar>
constexpr Scalar rad_to_deg(Scalar rad) {
  return rad * Scalar(180) / Scalar(kPi);
}

/// Yaw/pitch/roll triple in degrees.
template <typename Scalar>
struct EulerAnglesT {
  Scalar yaw{0};
  Scalar pitch{0};
  Scalar roll{0};
};

using EulerAngles = EulerAnglesT<double>;

// Order in which the single-axis factors multiply. kRollPitchYaw is the
// default: R = R_roll(x) * R_pitch(y) * R_yaw(z), i.e. yaw is applied
// first about the fixed vertical axis. The capture engine's convention is
// not knowable from the data alone, so the alternative order is exposed
// as a switch.
enum class EulerOrder {
  kRollPitchYaw,
  kYawPitchRoll,
};

template <typename Scalar>
Matrix3<Scalar> rotation_about_x(Scalar rad) {
  const Scalar c = std::cos(rad), s = std::sin(rad);
  Matrix3<Scalar> r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

template <typename Scalar>
Matrix3<Scalar> rotation_about_y(Scalar rad) {
  const Scalar c = std::cos(rad), s = std::sin(rad);
  Matrix3<Scalar> r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

template <typename Scalar>
Matrix3<Scalar> rotation_about_z(Scalar rad) {
  const Scalar c = std::cos(rad), s = std::sin(rad);
  Matrix3<Scalar> r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

/// Builds the headset/eye rotation matrix from yaw/pitch/roll degrees.
/// Every factor is a proper rotation, so the product is orthonormal with
/// determinant +1 for any finite input.
template <typename Scalar>
Matrix3<Scalar> euler_to_matrix(const EulerAnglesT<Scalar>& a,
                                EulerOrder order = EulerOrder::kRollPitchYaw) {
  const Matrix3<Scalar> rx = rotation_about_x(deg_to_rad(a.roll));
  const Matrix3<Scalar> ry = rotation_about_y(deg_to_rad(a.pitch));
  const Matrix3<Scalar> rz = rotation_about_z(deg_to_rad(a.yaw));
  if (order == EulerOrder::kRollPitchYaw) {
    return rx * ry * rz;
  }
  return rz * ry * rx;
}

/// Global gaze orientation: headset rotation composed with the eye-in-head
/// rotation.
template <typename Scalar>
Matrix3<Scalar> compose_gaze(const Matrix3<Scalar>& headset,
                             const Matrix3<Scalar>& eye) {
  return headset * eye;
}

template <typename Scalar>
Vector3<Scalar> canonical_forward() {
  return Vector3<Scalar>(1, 0, 0);
}

/// World-frame viewing direction encoded by a rotation matrix.
template <typename Scalar>
Vector3<Scalar> forward_vector(const Matrix3<Scalar>& r) {
  return r * canonical_forward<Scalar>();
}

template <typename Scalar>
bool is_rotation(const Matrix3<Scalar>& r, Scalar tol = Scalar(1e-9)) {
  const Matrix3<Scalar> gram = r.transpose() * r;
  const Scalar ortho_err =
      (gram - Matrix3<Scalar>::Identity()).template lpNorm<Eigen::Infinity>();
  return ortho_err <= tol && std::abs(r.determinant() - Scalar(1)) <= tol;
}

/// Angle between two nonzero vectors in radians, stable near 0 and pi.
template <typename Scalar>
Scalar angle_between(const Vector3<Scalar>& a, const Vector3<Scalar>& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// Geodesic angle between two rotations in degrees.
template <typename Scalar>
Scalar geodesic_angle_deg(const Matrix3<Scalar>& a, const Matrix3<Scalar>& b) {
  const Scalar tr = (a.transpose() * b).trace();
  const Scalar c = std::clamp((tr - Scalar(1)) / Scalar(2), Scalar(-1), Scalar(1));
  return rad_to_deg(std::acos(c));
}

/// Geodesic angle between two directions in degrees.
template <typename Scalar>
Scalar direction_angle_deg(const Vector3<Scalar>& a, const Vector3<Scalar>& b) {
  return rad_to_deg(angle_between(a, b));
}

/// One world-frame viewing ray: headset position plus unit gaze direction.
struct GlobalGaze {
  Vec3 origin{0, 0, 0};
  Vec3 direction{1, 0, 0};

  static GlobalGaze from(const Vec3& origin, const Vec3& direction) {
    const double n = direction.norm();
    if (!(n > 0) || !std::isfinite(n)) {
      throw NumericError("GlobalGaze: direction is zero or non-finite");
    }
    return GlobalGaze{origin, direction / n};
  }
};

/// Weighted binocular fusion: normalize(cl*dl + cr*dr). A zero-confidence
/// eye is excluded exactly; both zero is an error.
inline Vec3 combine_eyes(const Vec3& left_dir, double left_conf,
                         const Vec3& right_dir, double right_conf) {
  if (left_conf <= 0 && right_conf <= 0) {
    throw DataError("combine_eyes: no valid eye (both confidences are 0)");
  }
  if (left_conf <= 0) return right_dir;
  if (right_conf <= 0) return left_dir;
  const Vec3 sum = left_conf * left_dir + right_conf * right_dir;
  const double n = sum.norm();
  if (!(n > 0)) {
    throw NumericError("combine_eyes: degenerate opposite-direction fusion");
  }
  return sum / n;
}

/// Cone membership: true iff the angle between (point - origin) and the
/// gaze direction is <= half_angle_deg. Boundary inclusive; independent of
/// the point's distance along its ray.
inline bool in_frustum(const GlobalGaze& gaze, const Vec3& point,
                       double half_angle_deg = 30.0) {
  const Vec3 to_point = point - gaze.origin;
  if (to_point.norm() == 0.0) {
    throw DataError("in_frustum: point coincides with the gaze origin");
  }
  const double angle = angle_between<double>(to_point, gaze.direction);
  return angle <= deg_to_rad(half_angle_deg) + kAngularEpsRad;
}

/// Recovers yaw/pitch (roll is unobservable from a direction, reported 0)
/// such that forward_vector(euler_to_matrix(result)) == f for unit f.
inline EulerAngles forward_to_euler(const Vec3& f) {
  const double sy = std::clamp(f.y(), -1.0, 1.0);
  EulerAngles out;
  out.yaw = rad_to_deg(std::asin(sy));
  out.pitch = (f.x() == 0.0 && f.z() == 0.0)
                  ? 0.0
                  : rad_to_deg(std::atan2(-f.z(), f.x()));
  out.roll = 0.0;
  return out;
}

}  // namespace vvt
