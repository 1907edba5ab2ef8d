#include "mipo/analysis.hpp"

#include <limits>
#include <stdexcept>

namespace mipo {

namespace {

void check_dims(const TrajectoryLinearization& lin) {
  if (lin.H.empty()) throw std::invalid_argument("empty linearization");
  const int n = static_cast<int>(lin.H[0].cols());
  for (const auto& h : lin.H) {
    if (h.cols() != n) throw std::invalid_argument("H dimension mismatch");
  }
  for (const auto& f : lin.F) {
    if (f.rows() != n || f.cols() != n) {
      throw std::invalid_argument("F dimension mismatch");
    }
  }
  if (static_cast<int>(lin.F.size()) + 1 < static_cast<int>(lin.H.size())) {
    throw std::invalid_argument("need F_k for every step but the last");
  }
}

}  // namespace

MatrixXd observability_matrix(const TrajectoryLinearization& lin) {
  check_dims(lin);
  const int n = static_cast<int>(lin.H[0].cols());
  int rows = 0;
  for (const auto& h : lin.H) rows += static_cast<int>(h.rows());

  MatrixXd obs(rows, n);
  MatrixXd phi = MatrixXd::Identity(n, n);
  int cursor = 0;
  for (std::size_t k = 0; k < lin.H.size(); ++k) {
    if (k > 0) phi = lin.F[k - 1] * phi;
    obs.middleRows(cursor, lin.H[k].rows()) = lin.H[k] * phi;
    cursor += static_cast<int>(lin.H[k].rows());
  }
  return obs;
}

MatrixXd observability_gramian(const TrajectoryLinearization& lin) {
  check_dims(lin);
  const int n = static_cast<int>(lin.H[0].cols());
  MatrixXd gram = MatrixXd::Zero(n, n);
  MatrixXd phi = MatrixXd::Identity(n, n);
  for (std::size_t k = 0; k < lin.H.size(); ++k) {
    if (k > 0) phi = lin.F[k - 1] * phi;
    const MatrixXd hp = lin.H[k] * phi;
    gram.noalias() += hp.transpose() * hp;
  }
  return 0.5 * (gram + gram.transpose());
}

RankReport rank_report(const MatrixXd& m, double tol_rel) {
  RankReport rep;
  if (m.size() == 0) return rep;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  rep.singular_values = svd.singularValues();
  const double smax = rep.singular_values(0);
  rep.tol = tol_rel * smax;
  if (smax == 0.0) return rep;
  int r = 0;
  while (r < rep.singular_values.size() && rep.singular_values(r) > rep.tol) {
    ++r;
  }
  rep.rank = r;
  if (r == 0) {
    rep.gap = 0.0;
  } else if (r == rep.singular_values.size()) {
    rep.gap = std::numeric_limits<double>::infinity();
  } else {
    const double below = rep.singular_values(r);
    rep.gap = below > 0.0 ? rep.singular_values(r - 1) / below
                          : std::numeric_limits<double>::infinity();
  }
  return rep;
}

int numerical_rank(const MatrixXd& m, double tol_rel) {
  return rank_report(m, tol_rel).rank;
}

CrlbAccumulator::CrlbAccumulator(const MatrixXd& p0) : p_(p0) {
  p_ = 0.5 * (p_ + p_.transpose());
}

void CrlbAccumulator::step(const MatrixXd& f, const MatrixXd& h,
                           const VectorXd& var) {
  MatrixXd prop = f * p_ * f.transpose();
  prop = 0.5 * (prop + prop.transpose());
  Eigen::LDLT<MatrixXd> ldlt(prop);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    prop.diagonal().array() += 1e-12 * prop.diagonal().maxCoeff();
    ldlt.compute(prop);
    regularized_ = true;
  }
  MatrixXd info = ldlt.solve(MatrixXd::Identity(p_.rows(), p_.cols()));
  if (h.rows() > 0) {
    info.noalias() +=
        h.transpose() * var.cwiseInverse().asDiagonal() * h;
  }
  info = 0.5 * (info + info.transpose());
  Eigen::LDLT<MatrixXd> inv(info);
  p_ = inv.solve(MatrixXd::Identity(p_.rows(), p_.cols()));
  p_ = 0.5 * (p_ + p_.transpose());
}

std::vector<MatrixXd> crlb_recursion(const TrajectoryLinearization& lin,
                                     const MatrixXd& p0) {
  if (p0.rows() != p0.cols()) throw std::invalid_argument("P0 must be square");
  std::vector<MatrixXd> out;
  out.reserve(lin.H.size() + 1);
  CrlbAccumulator acc(p0);
  out.push_back(acc.value());
  for (std::size_t k = 0; k < lin.H.size(); ++k) {
    if (k >= lin.F.size()) break;
    acc.step(lin.F[k], lin.H[k], lin.var[k]);
    out.push_back(acc.value());
  }
  return out;
}

}  // namespace mipo
