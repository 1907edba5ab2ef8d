#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace mipo {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Scalar-first unit quaternion q = [q_s; q_v]. Construction and composition
// renormalize, so ||q|| = 1 holds to 1e-9 everywhere downstream.
class UnitQuaternion {
 public:
  UnitQuaternion() : s_(1.0), v_(Vec3::Zero()) {}

  UnitQuaternion(double s, const Vec3& v) : s_(s), v_(v) { normalize(); }

  static UnitQuaternion identity() { return UnitQuaternion(); }

  // coeffs ordered [s, x, y, z]
  static UnitQuaternion from_coeffs(const Vec4& c) {
    return UnitQuaternion(c(0), c.tail<3>());
  }

  double scalar() const { return s_; }
  const Vec3& vec() const { return v_; }

  Vec4 coeffs() const {
    Vec4 c;
    c << s_, v_;
    return c;
  }

  UnitQuaternion inverse() const {
    UnitQuaternion q;
    q.s_ = s_;
    q.v_ = -v_;
    return q;
  }

  // Hamilton product q1 ⊗ q2
  UnitQuaternion operator*(const UnitQuaternion& o) const {
    return UnitQuaternion(s_ * o.s_ - v_.dot(o.v_),
                          s_ * o.v_ + o.s_ * v_ + v_.cross(o.v_));
  }

  // negated representative of the same rotation
  UnitQuaternion negated() const {
    UnitQuaternion q;
    q.s_ = -s_;
    q.v_ = -v_;
    return q;
  }

  bool is_finite() const { return std::isfinite(s_) && v_.allFinite(); }

 private:
  void normalize() {
    const double n = std::sqrt(s_ * s_ + v_.squaredNorm());
    s_ /= n;
    v_ /= n;
  }

  double s_;
  Vec3 v_;
};

// cross-product matrix, skew(v) * x = v × x
Mat3 skew(const Vec3& v);

// multiplicative maps: lmap(q1) * q2.coeffs() = rmap(q2) * q1.coeffs() = (q1 ⊗ q2).coeffs()
Mat4 lmap(const UnitQuaternion& q);
Mat4 rmap(const UnitQuaternion& q);

// bottom-right 3x3 block, the piece of L/R acting on vector parts
inline Mat3 vec_block(const Mat4& m) { return m.bottomRightCorner<3, 3>(); }

// first-order exponential [1; θ/2], renormalized. Intended for small ||θ||.
UnitQuaternion quat_exp(const Vec3& theta);

// exact axis-angle exponential [cos(φ/2); sin(φ/2) u]
UnitQuaternion quat_exp_exact(const Vec3& theta);

// first-order logarithm 2 q_v, sign-canonicalized to the ||θ|| < π branch
Vec3 quat_log(const UnitQuaternion& q);

// exact logarithm 2 atan2(||q_v||, q_s) q_v / ||q_v||, sign-canonicalized
Vec3 quat_log_exact(const UnitQuaternion& q);

// rotation matrix of q, via R(q) = B^T L(q) R(q)^T B
Mat3 rot_of(const UnitQuaternion& q);

// yaw angle in (-π, π] extracted from the orientation quaternion
double yaw_of(const UnitQuaternion& q);

// wrap an angle to (-π, π]
double wrap_angle(double a);

// d yaw(q ⊗ Exp(δθ)) / d δθ at δθ = 0, for scalar yaw updates
Eigen::RowVector3d yaw_error_jacobian(const UnitQuaternion& q);

}  // namespace mipo
