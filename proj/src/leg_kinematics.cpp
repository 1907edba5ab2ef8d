#include "mipo/leg_kinematics.hpp"

#include <cmath>

namespace mipo {

namespace {

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return m;
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return m;
}

}  // namespace

Vec3 fk_position(const LegModel& model, const Vec3& alpha) {
  const Vec3& l = model.link_lengths;
  const Vec3& sg = model.axis_signs;
  const Mat3 r1 = rot_x(sg(0) * alpha(0));
  const Mat3 r2 = rot_y(sg(1) * alpha(1));
  const Mat3 r3 = rot_y(sg(2) * alpha(2));
  const Vec3 abduct(0.0, model.side() * l(0), 0.0);
  const Vec3 thigh(0.0, 0.0, -l(1));
  const Vec3 calf(0.0, 0.0, -l(2));
  return model.hip_offset + r1 * (abduct + r2 * (thigh + r3 * calf));
}

Mat3 fk_jacobian(const LegModel& model, const Vec3& alpha) {
  const Vec3& l = model.link_lengths;
  const Vec3& sg = model.axis_signs;
  const Mat3 r1 = rot_x(sg(0) * alpha(0));
  const Mat3 r2 = rot_y(sg(1) * alpha(1));
  const Vec3 abduct(0.0, model.side() * l(0), 0.0);
  const Vec3 thigh(0.0, 0.0, -l(1));

  const Vec3 p = fk_position(model, alpha);
  const Vec3 o1 = model.hip_offset;
  const Vec3 o2 = o1 + r1 * abduct;
  const Vec3 o3 = o2 + r1 * r2 * thigh;

  const Vec3 a1 = sg(0) * Vec3::UnitX();
  const Vec3 a2 = sg(1) * (r1 * Vec3::UnitY());
  const Vec3 a3 = sg(2) * (r1 * r2 * Vec3::UnitY());

  Mat3 j;
  j.col(0) = a1.cross(p - o1);
  j.col(1) = a2.cross(p - o2);
  j.col(2) = a3.cross(p - o3);
  return j;
}

UnitQuaternion fk_orientation(const LegModel& model, const Vec3& alpha) {
  const Vec3& sg = model.axis_signs;
  const UnitQuaternion q1 =
      quat_exp_exact(sg(0) * alpha(0) * Vec3::UnitX());
  const UnitQuaternion q2 =
      quat_exp_exact(sg(1) * alpha(1) * Vec3::UnitY());
  const UnitQuaternion q3 =
      quat_exp_exact(sg(2) * alpha(2) * Vec3::UnitY());
  return q1 * q2 * q3;
}

Mat3 fk_axes(const LegModel& model, const Vec3& alpha) {
  const Vec3& sg = model.axis_signs;
  const Mat3 r1 = rot_x(sg(0) * alpha(0));
  const Mat3 r2 = rot_y(sg(1) * alpha(1));
  Mat3 ax;
  ax.col(0) = sg(0) * Vec3::UnitX();
  ax.col(1) = sg(1) * (r1 * Vec3::UnitY());
  ax.col(2) = sg(2) * (r1 * r2 * Vec3::UnitY());
  return ax;
}

Vec3 lo_velocity(const LegModel& model, const UnitQuaternion& q_body,
                 const Vec3& alpha, const Vec3& alpha_dot, const Vec3& omega_b,
                 const Vec3& v_foot_world) {
  const Mat3 r = rot_of(q_body);
  return -r * (fk_jacobian(model, alpha) * alpha_dot +
               skew(omega_b) * fk_position(model, alpha)) +
         v_foot_world;
}

bool ik_angles(const LegModel& model, const Vec3& p_foot_body, Vec3* alpha) {
  const Vec3& l = model.link_lengths;
  const Vec3& sg = model.axis_signs;
  const Vec3 r = p_foot_body - model.hip_offset;
  const double side_l1 = model.side() * l(0);

  // roll angle: rotate the (y, z) components so y lands on the abduct offset
  const double rho = std::hypot(r(1), r(2));
  if (rho < std::abs(side_l1) || rho < 1e-12) return false;
  const double phi =
      std::atan2(r(2), r(1)) + std::acos(std::min(1.0, std::max(-1.0, side_l1 / rho)));
  const Vec3 r1 = rot_x(phi).transpose() * r;

  // planar 2R in the x-z plane below the hip-pitch joint
  const double x = r1(0);
  const double z = r1(2);
  const double d =
      (x * x + z * z - l(1) * l(1) - l(2) * l(2)) / (2.0 * l(1) * l(2));
  if (d < -1.0 || d > 1.0) return false;
  const double knee = -std::acos(d);
  const double k1 = l(1) + l(2) * std::cos(knee);
  const double k2 = l(2) * std::sin(knee);
  const double hip_pitch = std::atan2(-x, -z) - std::atan2(k2, k1);

  (*alpha)(0) = sg(0) * phi;
  (*alpha)(1) = sg(1) * wrap_angle(hip_pitch);
  (*alpha)(2) = sg(2) * knee;
  return alpha->allFinite();
}

}  // namespace mipo
