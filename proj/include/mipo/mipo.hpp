#pragma once

#include <optional>
#include <vector>

#include "mipo/leg_kinematics.hpp"
#include "mipo/noise_config.hpp"
#include "mipo/records.hpp"

namespace mipo {

// Multi-IMU proprioceptive odometry error-state EKF. Raw state
// x = [p v q b_a b_g | (s ds q_f b_s b_t) per leg]; error state is
// 15(1+E)-dimensional with three-parameter rotation errors.
inline constexpr int kBlockDim = 15;

// offsets inside a 15-dim body or foot block
enum BlockOffset {
  kPos = 0,   // p (body) or s (foot)
  kVel = 3,   // v or ds
  kTheta = 6, // dtheta or dtheta_f
  kBiasA = 9, // b_a or b_s
  kBiasG = 12 // b_g or b_t
};

struct MipoConfig {
  NoiseConfig noise;
  std::vector<LegModel> legs;
  double saturation_limit = 150.0;  // m/s^2

  double p0_pos = 1e-6;
  double p0_vel = 1e-2;
  double p0_ori = 1e-4;
  double p0_bias = 1e-4;
  double p0_foot_pos = 1e-4;
  double p0_foot_vel = 1e-2;
  double p0_foot_ori = 1e-3;
  double p0_foot_bias = 1e-4;

  int num_legs() const { return static_cast<int>(legs.size()); }
  int error_dim() const { return kBlockDim * (1 + num_legs()); }
  int leg_base(int j) const { return kBlockDim * (1 + j); }
};

struct MipoState {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  UnitQuaternion q;
  Vec3 ba = Vec3::Zero();
  Vec3 bg = Vec3::Zero();
  std::vector<Vec3> s, ds, bs, bt;
  std::vector<UnitQuaternion> qf;
  MatrixXd P;

  int num_legs() const { return static_cast<int>(s.size()); }
};

// per-leg residual stack; row order [fk_pos fk_ori lo_vel pivot gravity]
struct LegMeasurement {
  Eigen::Matrix<double, 15, 1> residual;
  Eigen::Matrix<double, 15, 15> Hb;  // w.r.t. the body error block
  Eigen::Matrix<double, 15, 15> Hf;  // w.r.t. this leg's error block
  Eigen::Matrix<double, 15, 1> var;  // diagonal of Sigma_w
  bool pivot_degenerate = false;
};

struct MipoMeasurement {
  std::vector<LegMeasurement> legs;
};

struct UpdateDiagnostics {
  std::vector<double> mahalanobis;  // pivot-residual Mahalanobis norm per leg
  std::vector<bool> gate;           // per-leg contact decision
  std::vector<bool> degenerate;     // pivot geometry failure per leg
  VectorXd innovation;              // stacked included residuals
  MatrixXd innovation_cov;          // S of the stacked included rows
  bool saturation_flagged = false;
  bool update_skipped = false;      // singular S encountered
};

MipoState mipo_init(const MipoConfig& cfg, double t, const Vec3& p,
                    const Vec3& v, const UnitQuaternion& q,
                    const std::vector<Vec3>& foot_pos,
                    const std::vector<Vec3>& foot_vel,
                    const std::vector<UnitQuaternion>& foot_q);

// process model: body and per-foot blocks propagate through the structurally
// identical IMU kinematics rows; biases held
MipoState mipo_predict_mean(const MipoConfig& cfg, const MipoState& x,
                            const SensorRecord& z, double dt,
                            bool* saturation = nullptr);

// error-state transition; block diagonal across body and feet
MatrixXd mipo_process_jacobian(const MipoConfig& cfg, const MipoState& x,
                               const SensorRecord& z, double dt);

// predicted stance-foot velocity from the pivoting contact model,
// s_dot = omega_p x d_p. Returns false on degenerate geometry (||n|| ~ 0).
bool pivoting_velocity(const LegModel& model, const UnitQuaternion& q,
                       const UnitQuaternion& qf, const Vec3& bt,
                       const Vec3& gyro_foot, const Vec3& joint_angle,
                       Vec3* s_dot);

MipoMeasurement mipo_measure(const MipoConfig& cfg, const MipoState& x,
                             const SensorRecord& z);

// Mahalanobis contact test, true iff ||y||_S < sigma
bool contact_gate(double mahalanobis_norm, double sigma);

// full covariance predict (mean + P)
MipoState mipo_predict(const MipoConfig& cfg, const MipoState& x,
                       const SensorRecord& z, double dt,
                       bool* saturation = nullptr);

// one filter step: predict, gate, per-leg sequential updates, retraction.
// Optionally exports the linearization of the included measurement rows.
MipoState mipo_step(const MipoConfig& cfg, const MipoState& x,
                    const SensorRecord& z, double dt,
                    UpdateDiagnostics* diag = nullptr,
                    MatrixXd* F_out = nullptr, MatrixXd* H_out = nullptr,
                    VectorXd* var_out = nullptr);

// scalar yaw update with innovation wrapped to (-pi, pi]
MipoState mipo_yaw_update(const MipoConfig& cfg, const MipoState& x,
                          double yaw_meas, double yaw_var);

// stacks a leg measurement into rows over the full error dimension
MatrixXd leg_rows_to_full(const MipoConfig& cfg, int leg,
                          const Eigen::Matrix<double, 15, 15>& Hb,
                          const Eigen::Matrix<double, 15, 15>& Hf,
                          int row_begin, int row_count);

// error-state retraction x ⊞ dx and its inverse a ⊟ b
MipoState mipo_boxplus(const MipoConfig& cfg, const MipoState& x,
                       const VectorXd& dx);
VectorXd mipo_boxminus(const MipoConfig& cfg, const MipoState& a,
                       const MipoState& b);

// all residual blocks of every leg stacked into one vector (15E rows)
VectorXd mipo_stacked_residual(const MipoConfig& cfg, const MipoState& x,
                               const SensorRecord& z);

// the matching stacked analytical H (15E x error_dim)
MatrixXd mipo_stacked_h(const MipoConfig& cfg, const MipoState& x,
                        const SensorRecord& z);

}  // namespace mipo
