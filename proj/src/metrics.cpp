#include "mipo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mipo {

AlignedTrajectoryPair associate(const std::vector<TrajectorySample>& est,
                                const std::vector<TrajectorySample>& truth) {
  AlignedTrajectoryPair out;
  if (truth.size() < 2) throw std::invalid_argument("truth too short");
  const double spacing = (truth.back().t - truth.front().t) /
                         static_cast<double>(truth.size() - 1);
  const double tol = 0.5 * spacing;

  // cumulative XY path length along the truth
  std::vector<double> s(truth.size(), 0.0);
  for (std::size_t i = 1; i < truth.size(); ++i) {
    s[i] = s[i - 1] + (truth[i].p - truth[i - 1].p).head<2>().norm();
  }

  std::size_t cursor = 0;
  for (const auto& e : est) {
    while (cursor + 1 < truth.size() &&
           std::abs(truth[cursor + 1].t - e.t) <= std::abs(truth[cursor].t - e.t)) {
      ++cursor;
    }
    if (std::abs(truth[cursor].t - e.t) > tol) {
      ++out.dropped;
      continue;
    }
    out.t.push_back(e.t);
    out.est.push_back(e.p);
    out.truth.push_back(truth[cursor].p);
    out.path_length.push_back(s[cursor]);
  }
  return out;
}

double drift_at(const AlignedTrajectoryPair& pair, std::size_t k) {
  const double s = pair.path_length[k];
  if (s <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double rse = (pair.truth[k] - pair.est[k]).head<2>().norm();
  return rse / s * 100.0;
}

DriftStats aggregate(const AlignedTrajectoryPair& pair) {
  DriftStats stats;
  std::vector<double> drifts;
  drifts.reserve(pair.t.size());
  double last = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < pair.t.size(); ++k) {
    const double d = drift_at(pair, k);
    const double rse = (pair.truth[k] - pair.est[k]).head<2>().norm();
    stats.max_rse = std::max(stats.max_rse, rse);
    if (std::isnan(d)) continue;
    drifts.push_back(d);
    last = d;
  }
  if (drifts.empty()) {
    throw std::invalid_argument("no sample with positive path length");
  }
  stats.valid_samples = static_cast<int>(drifts.size());
  double sum = 0.0;
  for (double d : drifts) sum += d;
  stats.avr_drift = sum / drifts.size();
  std::vector<double> sorted = drifts;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  stats.med_drift = n % 2 == 1 ? sorted[n / 2]
                               : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  stats.final_drift = last;
  return stats;
}

}  // namespace mipo
