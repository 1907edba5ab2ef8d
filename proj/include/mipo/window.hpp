#pragma once

#include <map>
#include <memory>
#include <vector>

#include "mipo/noise_config.hpp"
#include "mipo/records.hpp"

namespace mipo {

// Sliding-window keyframe state [p q v b_a b_g]; 15-dim error layout
// [dp 0, dv 3, dtheta 6, dba 9, dbg 12] matching the filter body block.
struct KeyframeState {
  double stamp = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  UnitQuaternion q;
  Vec3 ba = Vec3::Zero();
  Vec3 bg = Vec3::Zero();
};

inline constexpr int kKfDim = 15;

// x ⊟ ref, with the rotation difference through the first-order log
VectorXd kf_boxminus(const KeyframeState& x, const KeyframeState& ref);
void kf_retract(KeyframeState* x, const VectorXd& dx);

// PO-velocity preintegral: eps = sum nu_i dt, cov = sum sigma_i dt
struct PoPreintegral {
  Vec3 eps = Vec3::Zero();
  Mat3 cov = Mat3::Zero();
  double t_begin = 0.0;
  double t_end = 0.0;
  int count = 0;

  void add(const Vec3& nu, const Mat3& sigma, double dt) {
    eps += nu * dt;
    cov += sigma * dt;
    t_end += dt;
    ++count;
  }
};

// Whitened residual factor over one or more keyframes.
class Factor {
 public:
  virtual ~Factor() = default;
  virtual const std::vector<long>& keys() const = 0;
  virtual int dim() const = 0;
  // r and per-key Jacobian blocks (dim x 15 each), whitened
  virtual void linearize(const std::vector<const KeyframeState*>& x,
                         VectorXd* r, std::vector<MatrixXd>* jac) const = 0;
};

std::shared_ptr<Factor> make_prior_factor(long key, const KeyframeState& ref,
                                          const MatrixXd& sqrt_info);

// r = (p_b - p_a) - eps, whitened by the preintegral covariance
std::shared_ptr<Factor> make_po_displacement_factor(long key_a, long key_b,
                                                    const PoPreintegral& pre);

// synthetic absolute pose measurement standing in for the camera subsystem
std::shared_ptr<Factor> make_anchor_factor(long key, const Vec3& p_meas,
                                           const UnitQuaternion& q_meas,
                                           double pos_sigma, double ori_sigma);

struct ImuSample {
  double dt;
  Vec3 accel;
  Vec3 gyro;
};

// direct Euler integration of the body IMU between two keyframes; residual is
// the 15-dim difference between the propagated and the estimated end state,
// whitened by the accumulated process covariance
std::shared_ptr<Factor> make_inertial_factor(long key_a, long key_b,
                                             std::vector<ImuSample> samples,
                                             const NoiseConfig& noise);

// generic linear factor over stacked error states, r = sqrt_info*(H dx + b0
// + offset(x)); used by tests to build exactly linear graphs
std::shared_ptr<Factor> make_linear_factor(
    std::vector<long> keys, const MatrixXd& h_blocks, const VectorXd& rhs,
    const MatrixXd& sqrt_info, const std::vector<KeyframeState>& lin_points);

struct SolveStats {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double grad_inf_norm = 0.0;
  bool converged = false;
  bool damped = false;  // Levenberg damping engaged
};

class WindowGraph {
 public:
  WindowGraph() = default;

  long add_keyframe(const KeyframeState& kf);
  void add_factor(const std::shared_ptr<Factor>& f);

  int num_keyframes() const { return static_cast<int>(order_.size()); }
  const KeyframeState& keyframe(long id) const { return states_.at(id); }
  KeyframeState& keyframe_mutable(long id) { return states_.at(id); }
  long oldest_id() const { return order_.front(); }
  long newest_id() const { return order_.back(); }

  // Gauss-Newton with automatic Levenberg damping; quaternion retraction.
  // Terminates on ||grad||_inf < 1e-8 or 50 iterations.
  SolveStats solve();

  // Schur-complement removal of the oldest keyframe; connected factors are
  // absorbed into a dense linearized prior. Returns false when the state had
  // no factors (it is simply dropped).
  bool marginalize_oldest();

  // marginal covariance block of one keyframe from the current linearization
  MatrixXd marginal_covariance(long id) const;

  // rank deficiency of the undamped normal equations (gauge diagnosis)
  int normal_rank_deficiency(double tol_rel = 1e-8) const;

  const std::vector<std::shared_ptr<Factor>>& factors() const {
    return factors_;
  }

  bool prior_floored() const { return prior_floored_; }

 private:
  void build_normal(MatrixXd* jtj, VectorXd* jtr, double* cost) const;

  std::map<long, KeyframeState> states_;
  std::vector<long> order_;
  std::vector<std::shared_ptr<Factor>> factors_;
  long next_id_ = 0;
  bool prior_floored_ = false;
};

// yaw injection event produced after a window solve
struct YawFeedback {
  double stamp = 0.0;
  double yaw = 0.0;
  double variance = 0.0;
};

YawFeedback feedback_yaw(const WindowGraph& graph);

}  // namespace mipo
