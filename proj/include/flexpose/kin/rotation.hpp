// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace flexpose::kin {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rotation vector: direction is the axis, norm the angle in radians.
struct AxisAngle {
  Vec3 v = Vec3::Zero();
  double angle() const { return v.norm(); }
};

/// Unit quaternion kept in the w >= 0 hemisphere.
struct UnitQuaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  /// Normalizes and flips to the canonical (w >= 0) sign.
  static UnitQuaternion normalized(double w, double x, double y, double z);
  UnitQuaternion conjugate() const { return {w, -x, -y, -z}; }
  UnitQuaternion operator*(const UnitQuaternion& o) const;
  Vec3 vec() const { return {x, y, z}; }
};

/// A proper rotation matrix.
struct RotationMatrix {
  Mat3 m = Mat3::Identity();
};

/// First two columns of a rotation matrix.
struct Rot6D {
  Vec3 a1 = Vec3::UnitX();
  Vec3 a2 = Vec3::UnitY();
};

/// Throws ValidationError when m is not orthonormal with det +1 within tol.
void validate_rotation(const Mat3& m, double tol = 1e-6);

Mat3 to_matrix(const AxisAngle& r);
Mat3 to_matrix(const UnitQuaternion& q);
Mat3 to_matrix(const Rot6D& r);
inline Mat3 to_matrix(const RotationMatrix& r) { return r.m; }

UnitQuaternion to_quaternion(const AxisAngle& r);
UnitQuaternion to_quaternion(const Mat3& m);
inline UnitQuaternion to_quaternion(const UnitQuaternion& q) { return q; }
inline UnitQuaternion to_quaternion(const RotationMatrix& r) { return to_quaternion(r.m); }
inline UnitQuaternion to_quaternion(const Rot6D& r) { return to_quaternion(to_matrix(r)); }

AxisAngle to_axis_angle(const UnitQuaternion& q);
inline AxisAngle to_axis_angle(const Mat3& m) { return to_axis_angle(to_quaternion(m)); }

Rot6D to_rot6d(const Mat3& m);

namespace detail {
template <typename T>
struct Tag {};
inline AxisAngle from_quaternion(const UnitQuaternion& q, Tag<AxisAngle>) { return to_axis_angle(q); }
inline UnitQuaternion from_quaternion(const UnitQuaternion& q, Tag<UnitQuaternion>) { return q; }
inline RotationMatrix from_quaternion(const UnitQuaternion& q, Tag<RotationMatrix>) {
  return {to_matrix(q)};
}
inline Rot6D from_quaternion(const UnitQuaternion& q, Tag<Rot6D>) { return to_rot6d(to_matrix(q)); }
}  // namespace detail

/// Converts between any two representations. Matrix inputs are validated
/// before conversion; the quaternion is used as the hub.
template <typename To, typename From>
To convert(const From& from) {
  if constexpr (std::is_same_v<From, RotationMatrix>) validate_rotation(from.m);
  return detail::from_quaternion(to_quaternion(from), detail::Tag<To>{});
}

/// Angle of r1^-1 r2 in degrees, in [0, 180].
double geodesic_angle_deg(const Mat3& r1, const Mat3& r2);
double geodesic_angle_deg(const UnitQuaternion& q1, const UnitQuaternion& q2);

/// Skew-symmetric cross-product matrix.
Mat3 skew(const Vec3& v);

/// Jacobian of R(r) u with respect to the rotation vector r.
Mat3 rotated_vector_jacobian(const Vec3& r, const Vec3& u);

/// Wraps a rotation vector so its angle lies in [0, pi].
Vec3 canonical_axis_angle(const Vec3& r);

}  // namespace flexpose::kin
