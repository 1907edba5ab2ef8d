#pragma once

#include <random>

#include "mipo/mipo.hpp"

namespace mipo {

// Randomized finite-difference validation of the analytical process and
// measurement Jacobians. Random states keep the pivot geometry and the
// relative foot orientation away from their singular sets.
MipoState random_mipo_state(const MipoConfig& cfg, std::mt19937_64* rng);
SensorRecord random_sensor_record(const MipoConfig& cfg, std::mt19937_64* rng);

// central differences of the lifted predict map, step eps
MatrixXd fd_process_jacobian(const MipoConfig& cfg, const MipoState& x,
                             const SensorRecord& z, double dt,
                             double eps = 1e-6);

// central differences of the stacked residual; equals -H
MatrixXd fd_measurement_jacobian(const MipoConfig& cfg, const MipoState& x,
                                 const SensorRecord& z, double eps = 1e-6);

struct JacobianCheckReport {
  int states = 0;
  double max_f_err = 0.0;  // max |F_fd - F| / max(1, ||F||_inf)
  double max_h_err = 0.0;
  double max_appendix_err = 0.0;  // appendix orientation blocks vs FD
  bool pass(double tol) const {
    return max_f_err < tol && max_h_err < tol && max_appendix_err < tol;
  }
};

JacobianCheckReport run_jacobian_check(const MipoConfig& cfg, int num_states,
                                       unsigned seed, double dt = 2e-3);

}  // namespace mipo
