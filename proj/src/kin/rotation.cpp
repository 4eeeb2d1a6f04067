// SPDX-License-Identifier: Apache-2.0
#include "flexpose/kin/rotation.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "flexpose/error.hpp"

namespace flexpose::kin {

UnitQuaternion UnitQuaternion::normalized(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("quaternion has zero or non-finite norm");
  const double s = (w < 0.0 ? -1.0 : 1.0) / n;
  return {w * s, x * s, y * s, z * s};
}

UnitQuaternion UnitQuaternion::operator*(const UnitQuaternion& o) const {
  return normalized(w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
                    w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w);
}

void validate_rotation(const Mat3& m, double tol) {
  if (!m.allFinite()) throw ValidationError("rotation matrix has non-finite entries");
  const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > tol) throw ValidationError("matrix is not orthonormal");
  if (std::fabs(m.determinant() - 1.0) > tol) throw ValidationError("matrix is not a proper rotation");
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

Mat3 to_matrix(const AxisAngle& r) {
  const double theta = r.v.norm();
  const Mat3 k = skew(r.v);
  if (theta < 1e-8) {
    // Second-order Taylor expansion of Rodrigues' formula.
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Mat3 to_matrix(const UnitQuaternion& q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

Mat3 to_matrix(const Rot6D& r) {
  const double n1 = r.a1.norm();
  if (!(n1 > 1e-12)) throw ValidationError("6D rotation has a zero first column");
  const Vec3 b1 = r.a1 / n1;
  const Vec3 u2 = r.a2 - b1.dot(r.a2) * b1;
  const double n2 = u2.norm();
  if (!(n2 > 1e-12)) throw ValidationError("6D rotation columns are parallel");
  const Vec3 b2 = u2 / n2;
  Mat3 m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b1.cross(b2);
  return m;
}

UnitQuaternion to_quaternion(const AxisAngle& r) {
  const double theta = r.v.norm();
  const double half = 0.5 * theta;
  // sin(half)/theta, with its series near zero.
  const double k = theta < 1e-8 ? 0.5 - theta * theta / 48.0 : std::sin(half) / theta;
  return UnitQuaternion::normalized(std::cos(half), k * r.v.x(), k * r.v.y(), k * r.v.z());
}

UnitQuaternion to_quaternion(const Mat3& m) {
  // Shepperd's method: pivot on the largest of (trace, diagonal) for accuracy.
  const double tr = m.trace();
  double w, x, y, z;
  if (tr >= m(0, 0) && tr >= m(1, 1) && tr >= m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + tr);
    w = 0.25 * s;
    x = (m(2, 1) - m(1, 2)) / s;
    y = (m(0, 2) - m(2, 0)) / s;
    z = (m(1, 0) - m(0, 1)) / s;
  } else if (m(0, 0) >= m(1, 1) && m(0, 0) >= m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
    w = (m(2, 1) - m(1, 2)) / s;
    x = 0.25 * s;
    y = (m(0, 1) + m(1, 0)) / s;
    z = (m(0, 2) + m(2, 0)) / s;
  } else if (m(1, 1) >= m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2));
    w = (m(0, 2) - m(2, 0)) / s;
    x = (m(0, 1) + m(1, 0)) / s;
    y = 0.25 * s;
    z = (m(1, 2) + m(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1));
    w = (m(1, 0) - m(0, 1)) / s;
    x = (m(0, 2) + m(2, 0)) / s;
    y = (m(1, 2) + m(2, 1)) / s;
    z = 0.25 * s;
  }
  return UnitQuaternion::normalized(w, x, y, z);
}

AxisAngle to_axis_angle(const UnitQuaternion& q) {
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) return {2.0 * v / std::max(q.w, 1e-300)};
  const double angle = 2.0 * std::atan2(s, q.w);
  return {v * (angle / s)};
}

Rot6D to_rot6d(const Mat3& m) { return {m.col(0), m.col(1)}; }

double geodesic_angle_deg(const UnitQuaternion& q1, const UnitQuaternion& q2) {
  // conj(q1) * q2, grouped so that q1 == q2 cancels exactly.
  const Vec3 v1 = q1.vec(), v2 = q2.vec();
  const double w = q1.w * q2.w + v1.dot(v2);
  const Vec3 v = (q1.w * v2 - q2.w * v1) - v1.cross(v2);
  const double angle = 2.0 * std::atan2(v.norm(), std::fabs(w));
  return angle * 180.0 / std::numbers::pi;
}

double geodesic_angle_deg(const Mat3& r1, const Mat3& r2) {
  return geodesic_angle_deg(to_quaternion(r1), to_quaternion(r2));
}

Mat3 rotated_vector_jacobian(const Vec3& r, const Vec3& u) {
  const double theta2 = r.squaredNorm();
  const Mat3 rot = to_matrix(AxisAngle{r});
  if (theta2 < 1e-16) return -skew(u);
  // d(R u)/dr = -R [u]x (r r^T + (R^T - I)[r]x) / |r|^2
  return -rot * skew(u) * (r * r.transpose() + (rot.transpose() - Mat3::Identity()) * skew(r)) /
         theta2;
}

Vec3 canonical_axis_angle(const Vec3& r) { return to_axis_angle(to_quaternion(AxisAngle{r})).v; }

}  // namespace flexpose::kin
