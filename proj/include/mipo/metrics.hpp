#pragma once

#include <vector>

#include "mipo/rotation.hpp"

namespace mipo {

// Time-synchronized estimate/truth position pairs with the cumulative
// ground-truth XY path length.
struct AlignedTrajectoryPair {
  std::vector<double> t;
  std::vector<Vec3> est;
  std::vector<Vec3> truth;
  std::vector<double> path_length;  // s(t), non-decreasing
  int dropped = 0;                  // samples without a truth match
};

struct TrajectorySample {
  double t;
  Vec3 p;
};

// nearest-neighbor association within half the truth sample spacing
AlignedTrajectoryPair associate(const std::vector<TrajectorySample>& est,
                                const std::vector<TrajectorySample>& truth);

// DRIFT(t) = ||p - p_hat||_xy / s(t) * 100. Samples with s(t) = 0 are
// excluded from the aggregates; drift_at returns NaN for them.
double drift_at(const AlignedTrajectoryPair& pair, std::size_t k);

struct DriftStats {
  double avr_drift = 0.0;
  double med_drift = 0.0;
  double final_drift = 0.0;
  double max_rse = 0.0;  // max XY root-square-error, m
  int valid_samples = 0;
};

// throws std::invalid_argument when no sample has positive path length
DriftStats aggregate(const AlignedTrajectoryPair& pair);

}  // namespace mipo
