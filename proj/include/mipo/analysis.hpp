#pragma once

#include <vector>

#include "mipo/rotation.hpp"

namespace mipo {

// Jacobian pairs captured along an estimated trajectory. F[k] maps the error
// state from step k to k+1 and H[k]/var[k] describe the measurement rows
// applied at step k.
struct TrajectoryLinearization {
  std::vector<MatrixXd> F;
  std::vector<MatrixXd> H;
  std::vector<VectorXd> var;  // diagonal measurement variances per step

  int steps() const { return static_cast<int>(H.size()); }
  int dim() const { return F.empty() ? 0 : static_cast<int>(F[0].rows()); }
};

// stacked observability matrix [H_0; H_1 F_0; ...; H_T F_{T-1}...F_0]
MatrixXd observability_matrix(const TrajectoryLinearization& lin);

// local observability Gramian, sum of Phi_k^T H_k^T H_k Phi_k with the same
// transition products as the stacked matrix; symmetric PSD
MatrixXd observability_gramian(const TrajectoryLinearization& lin);

struct RankReport {
  int rank = 0;
  double tol = 0.0;          // absolute threshold applied, tol_rel * sigma_max
  double gap = 0.0;          // sigma[rank-1] / sigma[rank]; inf at full rank
  VectorXd singular_values;
};

RankReport rank_report(const MatrixXd& m, double tol_rel = 1e-8);
int numerical_rank(const MatrixXd& m, double tol_rel = 1e-8);

// Cramer-Rao recursion (P*_k)^-1 = (F_k P*_{k-1} F_k^T)^-1 + H_k^T S_w^-1 H_k.
// Streaming form; regularizes and warns when the propagated matrix is not
// invertible.
class CrlbAccumulator {
 public:
  explicit CrlbAccumulator(const MatrixXd& p0);

  void step(const MatrixXd& f, const MatrixXd& h, const VectorXd& var);

  const MatrixXd& value() const { return p_; }
  bool regularized() const { return regularized_; }

 private:
  MatrixXd p_;
  bool regularized_ = false;
};

// batch wrapper over the accumulator; returns [P*_0, P*_1, ..., P*_T]
std::vector<MatrixXd> crlb_recursion(const TrajectoryLinearization& lin,
                                     const MatrixXd& p0);

}  // namespace mipo
