#include "mipo/window.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace mipo {

VectorXd kf_boxminus(const KeyframeState& x, const KeyframeState& ref) {
  VectorXd d(kKfDim);
  d.segment<3>(0) = x.p - ref.p;
  d.segment<3>(3) = x.v - ref.v;
  d.segment<3>(6) = quat_log(ref.q.inverse() * x.q);
  d.segment<3>(9) = x.ba - ref.ba;
  d.segment<3>(12) = x.bg - ref.bg;
  return d;
}

void kf_retract(KeyframeState* x, const VectorXd& dx) {
  x->p += dx.segment<3>(0);
  x->v += dx.segment<3>(3);
  x->q = x->q * quat_exp(dx.segment<3>(6));
  x->ba += dx.segment<3>(9);
  x->bg += dx.segment<3>(12);
}

namespace {

// ∂ quat_log(ref^-1 ⊗ q ⊗ Exp(δ)) / ∂δ
Mat3 log_right_jacobian(const UnitQuaternion& ref, const UnitQuaternion& q) {
  const UnitQuaternion rel = ref.inverse() * q;
  const double sc = rel.scalar() < 0.0 ? -1.0 : 1.0;
  return sc * vec_block(lmap(rel));
}

// ∂ quat_log((ref ⊗ Exp(δ))^-1 ⊗ q) / ∂δ
Mat3 log_left_jacobian(const UnitQuaternion& ref, const UnitQuaternion& q) {
  const UnitQuaternion rel = ref.inverse() * q;
  const double sc = rel.scalar() < 0.0 ? -1.0 : 1.0;
  return -sc * vec_block(rmap(rel));
}

class PriorFactor : public Factor {
 public:
  PriorFactor(long key, const KeyframeState& ref, const MatrixXd& sqrt_info)
      : keys_{key}, ref_(ref), sqrt_info_(sqrt_info) {}

  const std::vector<long>& keys() const override { return keys_; }
  int dim() const override { return static_cast<int>(sqrt_info_.rows()); }

  void linearize(const std::vector<const KeyframeState*>& x, VectorXd* r,
                 std::vector<MatrixXd>* jac) const override {
    const VectorXd d = kf_boxminus(*x[0], ref_);
    *r = sqrt_info_ * d;
    MatrixXd j = MatrixXd::Identity(kKfDim, kKfDim);
    j.block<3, 3>(6, 6) = log_right_jacobian(ref_.q, x[0]->q);
    jac->assign(1, sqrt_info_ * j);
  }

 private:
  std::vector<long> keys_;
  KeyframeState ref_;
  MatrixXd sqrt_info_;
};

class PoDisplacementFactor : public Factor {
 public:
  PoDisplacementFactor(long a, long b, const PoPreintegral& pre)
      : keys_{a, b}, eps_(pre.eps) {
    Mat3 cov = pre.cov;
    cov.diagonal().array() += 1e-12;
    sqrt_info_ = Mat3(cov.llt().matrixL()).inverse();
  }

  const std::vector<long>& keys() const override { return keys_; }
  int dim() const override { return 3; }

  void linearize(const std::vector<const KeyframeState*>& x, VectorXd* r,
                 std::vector<MatrixXd>* jac) const override {
    *r = sqrt_info_ * ((x[1]->p - x[0]->p) - eps_);
    jac->assign(2, MatrixXd::Zero(3, kKfDim));
    (*jac)[0].block<3, 3>(0, 0) = -sqrt_info_;
    (*jac)[1].block<3, 3>(0, 0) = sqrt_info_;
  }

 private:
  std::vector<long> keys_;
  Vec3 eps_;
  Mat3 sqrt_info_;
};

class AnchorFactor : public Factor {
 public:
  AnchorFactor(long key, const Vec3& p_meas, const UnitQuaternion& q_meas,
               double pos_sigma, double ori_sigma)
      : keys_{key},
        p_meas_(p_meas),
        q_meas_(q_meas),
        wp_(1.0 / pos_sigma),
        wq_(1.0 / ori_sigma) {}

  const std::vector<long>& keys() const override { return keys_; }
  int dim() const override { return 6; }

  void linearize(const std::vector<const KeyframeState*>& x, VectorXd* r,
                 std::vector<MatrixXd>* jac) const override {
    r->resize(6);
    r->segment<3>(0) = wp_ * (x[0]->p - p_meas_);
    r->segment<3>(3) = wq_ * quat_log(q_meas_.inverse() * x[0]->q);
    jac->assign(1, MatrixXd::Zero(6, kKfDim));
    (*jac)[0].block<3, 3>(0, 0) = wp_ * Mat3::Identity();
    (*jac)[0].block<3, 3>(3, 6) = wq_ * log_right_jacobian(q_meas_, x[0]->q);
  }

 private:
  std::vector<long> keys_;
  Vec3 p_meas_;
  UnitQuaternion q_meas_;
  double wp_, wq_;
};

class InertialFactor : public Factor {
 public:
  InertialFactor(long a, long b, std::vector<ImuSample> samples,
                 const NoiseConfig& noise)
      : keys_{a, b}, samples_(std::move(samples)), noise_(noise) {}

  const std::vector<long>& keys() const override { return keys_; }
  int dim() const override { return kKfDim; }

  void linearize(const std::vector<const KeyframeState*>& x, VectorXd* r,
                 std::vector<MatrixXd>* jac) const override {
    // propagate from x[0] through the buffered IMU, chaining the error-state
    // transition and the process covariance
    KeyframeState prop = *x[0];
    MatrixXd f_chain = MatrixXd::Identity(kKfDim, kKfDim);
    MatrixXd cov = MatrixXd::Zero(kKfDim, kKfDim);
    for (const ImuSample& u : samples_) {
      const Mat3 rot = rot_of(prop.q);
      const Vec3 acc = u.accel - prop.ba;
      const Vec3 omega = u.gyro - prop.bg;

      MatrixXd f = MatrixXd::Identity(kKfDim, kKfDim);
      f.block<3, 3>(0, 3) = u.dt * Mat3::Identity();
      f.block<3, 3>(3, 6) = -u.dt * rot * skew(acc);
      f.block<3, 3>(3, 9) = -u.dt * rot;
      f.block<3, 3>(6, 6) = rot_of(quat_exp(omega * u.dt)).transpose();
      {
        const Vec3 av = omega * u.dt;
        const double h2 = 1.0 + 0.25 * av.squaredNorm();
        f.block<3, 3>(6, 12) =
            -u.dt * (Mat3::Identity() - 0.5 * skew(av)) / h2;
      }

      VectorXd qn(kKfDim);
      qn.segment<3>(0).setConstant(1e-12 * u.dt);
      qn.segment<3>(3).setConstant(noise_.accel_density * noise_.accel_density * u.dt);
      qn.segment<3>(6).setConstant(noise_.gyro_density * noise_.gyro_density * u.dt);
      qn.segment<3>(9).setConstant(noise_.accel_bias_walk * noise_.accel_bias_walk * u.dt);
      qn.segment<3>(12).setConstant(noise_.gyro_bias_walk * noise_.gyro_bias_walk * u.dt);

      cov = f * cov * f.transpose();
      cov.diagonal() += qn;
      f_chain = f * f_chain;

      prop.p += u.dt * prop.v;
      prop.v += u.dt * (rot * acc - noise_.gravity);
      prop.q = prop.q * quat_exp(omega * u.dt);
    }
    cov = 0.5 * (cov + cov.transpose());
    cov.diagonal().array() += 1e-14;
    const MatrixXd sqrt_info =
        MatrixXd(cov.llt().matrixL()).inverse();

    const VectorXd raw = kf_boxminus(*x[1], prop);
    *r = sqrt_info * raw;

    MatrixXd d_end = MatrixXd::Identity(kKfDim, kKfDim);
    d_end.block<3, 3>(6, 6) = log_right_jacobian(prop.q, x[1]->q);
    MatrixXd d_prop = -MatrixXd::Identity(kKfDim, kKfDim);
    d_prop.block<3, 3>(6, 6) = log_left_jacobian(prop.q, x[1]->q);

    jac->assign(2, MatrixXd());
    (*jac)[0] = sqrt_info * d_prop * f_chain;
    (*jac)[1] = sqrt_info * d_end;
  }

 private:
  std::vector<long> keys_;
  std::vector<ImuSample> samples_;
  NoiseConfig noise_;
};

class LinearFactor : public Factor {
 public:
  LinearFactor(std::vector<long> keys, const MatrixXd& h, const VectorXd& rhs,
               const MatrixXd& sqrt_info, std::vector<KeyframeState> lin)
      : keys_(std::move(keys)), h_(h), rhs_(rhs), lin_(std::move(lin)) {
    wh_ = sqrt_info * h_;
    wr0_ = sqrt_info * rhs_;
  }

  const std::vector<long>& keys() const override { return keys_; }
  int dim() const override { return static_cast<int>(h_.rows()); }

  void linearize(const std::vector<const KeyframeState*>& x, VectorXd* r,
                 std::vector<MatrixXd>* jac) const override {
    VectorXd dx(kKfDim * keys_.size());
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      dx.segment<kKfDim>(kKfDim * i) = kf_boxminus(*x[i], lin_[i]);
    }
    *r = wh_ * dx + wr0_;
    jac->resize(keys_.size());
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      (*jac)[i] = wh_.middleCols(kKfDim * i, kKfDim);
    }
  }

 private:
  std::vector<long> keys_;
  MatrixXd h_;
  VectorXd rhs_;
  std::vector<KeyframeState> lin_;
  MatrixXd wh_;
  VectorXd wr0_;
};

}  // namespace

std::shared_ptr<Factor> make_prior_factor(long key, const KeyframeState& ref,
                                          const MatrixXd& sqrt_info) {
  return std::make_shared<PriorFactor>(key, ref, sqrt_info);
}

std::shared_ptr<Factor> make_po_displacement_factor(long key_a, long key_b,
                                                    const PoPreintegral& pre) {
  return std::make_shared<PoDisplacementFactor>(key_a, key_b, pre);
}

std::shared_ptr<Factor> make_anchor_factor(long key, const Vec3& p_meas,
                                           const UnitQuaternion& q_meas,
                                           double pos_sigma, double ori_sigma) {
  return std::make_shared<AnchorFactor>(key, p_meas, q_meas, pos_sigma,
                                        ori_sigma);
}

std::shared_ptr<Factor> make_inertial_factor(long key_a, long key_b,
                                             std::vector<ImuSample> samples,
                                             const NoiseConfig& noise) {
  return std::make_shared<InertialFactor>(key_a, key_b, std::move(samples),
                                          noise);
}

std::shared_ptr<Factor> make_linear_factor(
    std::vector<long> keys, const MatrixXd& h_blocks, const VectorXd& rhs,
    const MatrixXd& sqrt_info, const std::vector<KeyframeState>& lin_points) {
  return std::make_shared<LinearFactor>(std::move(keys), h_blocks, rhs,
                                        sqrt_info, lin_points);
}

long WindowGraph::add_keyframe(const KeyframeState& kf) {
  const long id = next_id_++;
  states_[id] = kf;
  order_.push_back(id);
  return id;
}

void WindowGraph::add_factor(const std::shared_ptr<Factor>& f) {
  for (long k : f->keys()) {
    if (states_.find(k) == states_.end()) {
      throw std::invalid_argument("factor references a dead keyframe");
    }
  }
  factors_.push_back(f);
}

void WindowGraph::build_normal(MatrixXd* jtj, VectorXd* jtr,
                               double* cost) const {
  const int n = num_keyframes() * kKfDim;
  std::unordered_map<long, int> slot;
  for (std::size_t i = 0; i < order_.size(); ++i) {
    slot[order_[i]] = static_cast<int>(i) * kKfDim;
  }
  jtj->setZero(n, n);
  jtr->setZero(n);
  *cost = 0.0;

  VectorXd r;
  std::vector<MatrixXd> jac;
  std::vector<const KeyframeState*> xs;
  for (const auto& f : factors_) {
    xs.clear();
    for (long k : f->keys()) xs.push_back(&states_.at(k));
    f->linearize(xs, &r, &jac);
    *cost += r.squaredNorm();
    const auto& keys = f->keys();
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const int ci = slot.at(keys[i]);
      jtr->segment<kKfDim>(ci).noalias() += jac[i].transpose() * r;
      for (std::size_t j = 0; j < keys.size(); ++j) {
        const int cj = slot.at(keys[j]);
        jtj->block<kKfDim, kKfDim>(ci, cj).noalias() +=
            jac[i].transpose() * jac[j];
      }
    }
  }
}

SolveStats WindowGraph::solve() {
  SolveStats stats;
  const int n = num_keyframes() * kKfDim;
  if (n == 0) return stats;

  MatrixXd jtj(n, n);
  VectorXd jtr(n);
  double cost = 0.0;
  double lambda = 0.0;

  for (int it = 0; it < 50; ++it) {
    build_normal(&jtj, &jtr, &cost);
    if (it == 0) stats.initial_cost = cost;
    stats.iterations = it + 1;
    stats.grad_inf_norm = jtr.lpNorm<Eigen::Infinity>();
    stats.final_cost = cost;
    if (stats.grad_inf_norm < 1e-8) {
      stats.converged = true;
      break;
    }

    // try the Gauss-Newton step, escalating damping until the cost drops
    bool accepted = false;
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      MatrixXd lhs = jtj;
      if (lambda > 0.0) lhs.diagonal().array() += lambda;
      Eigen::LDLT<MatrixXd> ldlt(lhs);
      if (ldlt.info() != Eigen::Success) {
        lambda = std::max(lambda * 10.0, 1e-6);
        stats.damped = true;
        continue;
      }
      const VectorXd dx = ldlt.solve(-jtr);
      if (!dx.allFinite()) {
        lambda = std::max(lambda * 10.0, 1e-6);
        stats.damped = true;
        continue;
      }

      auto backup = states_;
      for (std::size_t i = 0; i < order_.size(); ++i) {
        kf_retract(&states_.at(order_[i]), dx.segment<kKfDim>(i * kKfDim));
      }
      MatrixXd jtj2;
      VectorXd jtr2;
      double cost2 = 0.0;
      build_normal(&jtj2, &jtr2, &cost2);
      if (cost2 <= cost + 1e-12) {
        accepted = true;
        lambda *= 0.5;
        if (lambda < 1e-9) lambda = 0.0;
      } else {
        states_ = backup;
        lambda = std::max(lambda * 10.0, 1e-6);
        stats.damped = true;
      }
    }
    if (!accepted) break;  // no acceptable step, report the last gradient
  }
  return stats;
}

bool WindowGraph::marginalize_oldest() {
  if (order_.empty()) return false;
  const long id0 = order_.front();

  std::vector<std::shared_ptr<Factor>> touching, keep;
  for (const auto& f : factors_) {
    const auto& k = f->keys();
    if (std::find(k.begin(), k.end(), id0) != k.end()) {
      touching.push_back(f);
    } else {
      keep.push_back(f);
    }
  }
  if (touching.empty()) {
    states_.erase(id0);
    order_.erase(order_.begin());
    return false;
  }

  // involved variables, marginalized block first
  std::vector<long> vars{id0};
  for (const auto& f : touching) {
    for (long k : f->keys()) {
      if (std::find(vars.begin(), vars.end(), k) == vars.end()) {
        vars.push_back(k);
      }
    }
  }
  std::unordered_map<long, int> slot;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    slot[vars[i]] = static_cast<int>(i) * kKfDim;
  }
  const int n = static_cast<int>(vars.size()) * kKfDim;
  MatrixXd lam = MatrixXd::Zero(n, n);
  VectorXd b = VectorXd::Zero(n);

  VectorXd r;
  std::vector<MatrixXd> jac;
  std::vector<const KeyframeState*> xs;
  for (const auto& f : touching) {
    xs.clear();
    for (long k : f->keys()) xs.push_back(&states_.at(k));
    f->linearize(xs, &r, &jac);
    const auto& keys = f->keys();
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const int ci = slot.at(keys[i]);
      b.segment<kKfDim>(ci).noalias() += jac[i].transpose() * r;
      for (std::size_t j = 0; j < keys.size(); ++j) {
        lam.block<kKfDim, kKfDim>(ci, slot.at(keys[j])).noalias() +=
            jac[i].transpose() * jac[j];
      }
    }
  }

  const int nr = n - kKfDim;  // remaining dims after the Schur complement
  if (nr > 0) {
    const MatrixXd lam_oo = lam.topLeftCorner(kKfDim, kKfDim);
    const MatrixXd lam_on = lam.topRightCorner(kKfDim, nr);
    const MatrixXd lam_nn = lam.bottomRightCorner(nr, nr);
    const VectorXd b_o = b.head(kKfDim);
    const VectorXd b_n = b.tail(nr);

    MatrixXd lam_oo_reg = lam_oo;
    lam_oo_reg.diagonal().array() += 1e-12;
    const Eigen::LDLT<MatrixXd> ldlt(lam_oo_reg);
    MatrixXd schur = lam_nn - lam_on.transpose() * ldlt.solve(lam_on);
    VectorXd b_schur = b_n - lam_on.transpose() * ldlt.solve(b_o);
    schur = 0.5 * (schur + schur.transpose());

    // eigenvalue square root of the remaining information
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(schur);
    VectorXd d = eig.eigenvalues();
    const double floor_tol = 1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff());
    VectorXd sqrt_d = VectorXd::Zero(d.size());
    VectorXd inv_sqrt_d = VectorXd::Zero(d.size());
    for (int i = 0; i < d.size(); ++i) {
      if (d(i) < -floor_tol) prior_floored_ = true;
      if (d(i) > floor_tol) {
        sqrt_d(i) = std::sqrt(d(i));
        inv_sqrt_d(i) = 1.0 / sqrt_d(i);
      }
    }
    const MatrixXd u = sqrt_d.asDiagonal() * eig.eigenvectors().transpose();
    const VectorXd c =
        inv_sqrt_d.asDiagonal() * eig.eigenvectors().transpose() * b_schur;

    std::vector<long> prior_keys(vars.begin() + 1, vars.end());
    std::vector<KeyframeState> lin;
    for (long k : prior_keys) lin.push_back(states_.at(k));
    keep.push_back(make_linear_factor(prior_keys, u, c,
                                      MatrixXd::Identity(nr, nr), lin));
  }

  factors_ = std::move(keep);
  states_.erase(id0);
  order_.erase(order_.begin());
  return true;
}

MatrixXd WindowGraph::marginal_covariance(long id) const {
  const int n = num_keyframes() * kKfDim;
  MatrixXd jtj(n, n);
  VectorXd jtr(n);
  double cost;
  build_normal(&jtj, &jtr, &cost);
  jtj.diagonal().array() += 1e-12;
  const MatrixXd cov = jtj.ldlt().solve(MatrixXd::Identity(n, n));
  int slot = 0;
  for (std::size_t i = 0; i < order_.size(); ++i) {
    if (order_[i] == id) slot = static_cast<int>(i) * kKfDim;
  }
  return cov.block<kKfDim, kKfDim>(slot, slot);
}

int WindowGraph::normal_rank_deficiency(double tol_rel) const {
  const int n = num_keyframes() * kKfDim;
  MatrixXd jtj(n, n);
  VectorXd jtr(n);
  double cost;
  build_normal(&jtj, &jtr, &cost);
  Eigen::JacobiSVD<MatrixXd> svd(jtj);
  const VectorXd sv = svd.singularValues();
  const double tol = tol_rel * sv(0);
  int rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  return n - rank;
}

YawFeedback feedback_yaw(const WindowGraph& graph) {
  YawFeedback out;
  const long id = graph.newest_id();
  const KeyframeState& kf = graph.keyframe(id);
  out.stamp = kf.stamp;
  out.yaw = yaw_of(kf.q);
  const MatrixXd cov = graph.marginal_covariance(id);
  const Eigen::RowVector3d j = yaw_error_jacobian(kf.q);
  out.variance = (j * cov.block<3, 3>(6, 6) * j.transpose())(0);
  return out;
}

}  // namespace mipo
