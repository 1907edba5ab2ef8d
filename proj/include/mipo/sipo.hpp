#pragma once

#include <optional>
#include <vector>

#include "mipo/leg_kinematics.hpp"
#include "mipo/noise_config.hpp"
#include "mipo/records.hpp"

namespace mipo {

// Standard single-IMU proprioceptive odometry EKF with the zero-velocity
// observation model and contact-based covariance scaling.
//
// Error-state layout: [dp dv dtheta (dba dbg) ds_1 ... ds_E]
struct SipoConfig {
  NoiseConfig noise;
  std::vector<LegModel> legs;
  bool estimate_biases = false;
  // subtracted from the raw IMU when biases are not estimated
  Vec3 fixed_bias_accel = Vec3::Zero();
  Vec3 fixed_bias_gyro = Vec3::Zero();

  double p0_pos = 1e-6;
  double p0_vel = 1e-2;
  double p0_ori = 1e-4;
  double p0_bias = 1e-4;
  double p0_foot = 1e-4;

  int num_legs() const { return static_cast<int>(legs.size()); }
  int error_dim() const {
    return 9 + (estimate_biases ? 6 : 0) + 3 * num_legs();
  }
  int foot_index(int leg) const {
    return 9 + (estimate_biases ? 6 : 0) + 3 * leg;
  }
};

struct SipoState {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  UnitQuaternion q;
  Vec3 ba = Vec3::Zero();
  Vec3 bg = Vec3::Zero();
  std::vector<Vec3> s;
  MatrixXd P;
};

struct SipoMeasurement {
  VectorXd residual;  // stacked [fk_pos; lo_vel] per leg
  MatrixXd H;         // rows x error_dim
  VectorXd var;       // diagonal of Sigma_w, contact-scaled
};

SipoState sipo_init(const SipoConfig& cfg, double t, const Vec3& p,
                    const Vec3& v, const UnitQuaternion& q,
                    const std::vector<Vec3>& foot_positions);

// Eq.-13-style Euler prediction; foot positions held, their process noise
// scaled by the contact flags
SipoState sipo_predict(const SipoConfig& cfg, const SipoState& x,
                       const SensorRecord& z, double dt);

// mean propagation only (no covariance); used by the Jacobian tests
SipoState sipo_predict_mean(const SipoConfig& cfg, const SipoState& x,
                            const SensorRecord& z, double dt);

MatrixXd sipo_process_jacobian(const SipoConfig& cfg, const SipoState& x,
                               const SensorRecord& z, double dt);

SipoMeasurement sipo_measure(const SipoConfig& cfg, const SipoState& x,
                             const SensorRecord& z);

struct SipoStepInfo {
  bool update_applied = true;  // false when S was not invertible
};

// predict + zero-velocity measurement update with quaternion retraction.
// Optionally exports the step linearization (F, H, measurement variances).
SipoState sipo_step(const SipoConfig& cfg, const SipoState& x,
                    const SensorRecord& z, double dt,
                    SipoStepInfo* info = nullptr, MatrixXd* F_out = nullptr,
                    MatrixXd* H_out = nullptr, VectorXd* var_out = nullptr);

// scalar yaw measurement update shared with the MIPO hook
SipoState sipo_yaw_update(const SipoConfig& cfg, const SipoState& x,
                          double yaw_meas, double yaw_var);

// error-state retraction and difference, used by the finite-difference tests
SipoState sipo_boxplus(const SipoConfig& cfg, const SipoState& x,
                       const VectorXd& dx);
VectorXd sipo_boxminus(const SipoConfig& cfg, const SipoState& a,
                       const SipoState& b);

}  // namespace mipo
