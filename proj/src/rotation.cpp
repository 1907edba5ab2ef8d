#include "mipo/rotation.hpp"

#include <cmath>

namespace mipo {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v(2), v(1),
       v(2), 0.0, -v(0),
       -v(1), v(0), 0.0;
  return m;
}

Mat4 lmap(const UnitQuaternion& q) {
  Mat4 m;
  m(0, 0) = q.scalar();
  m.block<1, 3>(0, 1) = -q.vec().transpose();
  m.block<3, 1>(1, 0) = q.vec();
  m.block<3, 3>(1, 1) = q.scalar() * Mat3::Identity() + skew(q.vec());
  return m;
}

Mat4 rmap(const UnitQuaternion& q) {
  Mat4 m;
  m(0, 0) = q.scalar();
  m.block<1, 3>(0, 1) = -q.vec().transpose();
  m.block<3, 1>(1, 0) = q.vec();
  m.block<3, 3>(1, 1) = q.scalar() * Mat3::Identity() - skew(q.vec());
  return m;
}

UnitQuaternion quat_exp(const Vec3& theta) {
  return UnitQuaternion(1.0, 0.5 * theta);
}

UnitQuaternion quat_exp_exact(const Vec3& theta) {
  const double angle = theta.norm();
  if (angle < 1e-12) {
    return UnitQuaternion(1.0, 0.5 * theta);
  }
  return UnitQuaternion(std::cos(0.5 * angle),
                        std::sin(0.5 * angle) * theta / angle);
}

Vec3 quat_log(const UnitQuaternion& q) {
  const double sign = q.scalar() < 0.0 ? -1.0 : 1.0;
  return sign * 2.0 * q.vec();
}

Vec3 quat_log_exact(const UnitQuaternion& q) {
  const UnitQuaternion c = q.scalar() < 0.0 ? q.negated() : q;
  const double vn = c.vec().norm();
  if (vn < 1e-12) {
    return 2.0 * c.vec();
  }
  return 2.0 * std::atan2(vn, c.scalar()) * c.vec() / vn;
}

Mat3 rot_of(const UnitQuaternion& q) {
  return vec_block(lmap(q) * rmap(q).transpose());
}

double yaw_of(const UnitQuaternion& q) {
  const double qs = q.scalar();
  const Vec3& v = q.vec();
  const double y = std::atan2(2.0 * (v(0) * v(1) + qs * v(2)),
                              1.0 - 2.0 * (v(1) * v(1) + v(2) * v(2)));
  return y <= -M_PI ? y + 2.0 * M_PI : y;
}

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a > M_PI) a -= 2.0 * M_PI;
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

Eigen::RowVector3d yaw_error_jacobian(const UnitQuaternion& q) {
  const double s = q.scalar();
  const Vec3& v = q.vec();
  const double u = 2.0 * (v(0) * v(1) + s * v(2));
  const double w = 1.0 - 2.0 * (v(1) * v(1) + v(2) * v(2));
  const double denom = u * u + w * w;
  Eigen::RowVector4d du, dw;
  du << 2.0 * v(2), 2.0 * v(1), 2.0 * v(0), 2.0 * s;
  dw << 0.0, 0.0, -4.0 * v(1), -4.0 * v(2);
  const Eigen::RowVector4d dyaw = (w * du - u * dw) / denom;
  return 0.5 * dyaw * lmap(q).rightCols<3>();
}

}  // namespace mipo
