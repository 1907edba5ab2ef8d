#pragma once

#include "mipo/rotation.hpp"

namespace mipo {

// 3-DOF serial chain, hip-roll -> hip-pitch -> knee-pitch, straight leg
// pointing down at alpha = 0. The abduction link extends toward the leg's
// side, taken from the sign of hip_offset.y().
struct LegModel {
  Vec3 hip_offset = Vec3::Zero();        // body frame, m
  Vec3 link_lengths = Vec3::Zero();      // [abduct, thigh, calf], m
  Vec3 axis_signs = Vec3::Ones();        // each in {-1, +1}
  double d0 = 0.02;                      // foot-center-to-surface distance, m

  double side() const { return hip_offset.y() >= 0.0 ? 1.0 : -1.0; }
  bool valid() const {
    return link_lengths.minCoeff() > 0.0 && d0 > 0.0 &&
           (axis_signs.cwiseAbs() - Vec3::Ones()).norm() == 0.0;
  }
};

struct JointState {
  Vec3 angle = Vec3::Zero();  // rad
  Vec3 rate = Vec3::Zero();   // rad/s
};

// foot-center position in the body frame, g(alpha)
Vec3 fk_position(const LegModel& model, const Vec3& alpha);

// J(alpha) with J * alpha_dot = d/dt g(alpha)
Mat3 fk_jacobian(const LegModel& model, const Vec3& alpha);

// foot frame orientation w.r.t. body, q(alpha); identity at alpha = 0
UnitQuaternion fk_orientation(const LegModel& model, const Vec3& alpha);

// columns are the joint axes in the body frame; the leg's angular velocity
// relative to the body is fk_axes(model, alpha) * alpha_dot
Mat3 fk_axes(const LegModel& model, const Vec3& alpha);

// body velocity in the world frame from one leg's kinematics:
// v = -R(q)[J(α)α̇ + skew(ω_b) g(α)] + v_f^w
Vec3 lo_velocity(const LegModel& model, const UnitQuaternion& q_body,
                 const Vec3& alpha, const Vec3& alpha_dot, const Vec3& omega_b,
                 const Vec3& v_foot_world);

// closed-form inverse kinematics for the body-frame foot target.
// Returns false when the target is outside the workspace.
bool ik_angles(const LegModel& model, const Vec3& p_foot_body, Vec3* alpha);

}  // namespace mipo
