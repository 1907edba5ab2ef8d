#pragma once

#include "mipo/rotation.hpp"

namespace mipo {

// Process densities, measurement variances, contact scaling constants and the
// Mahalanobis gate threshold. The defaults are this project's choices for a
// desk-scale MEMS-grade sensor suite; densities convert to per-sample standard
// deviations as sigma = density * sqrt(rate).
struct NoiseConfig {
  // continuous-time sensor noise densities (body and foot IMUs)
  double accel_density = 1e-2;      // m/s^2/sqrt(Hz)
  double gyro_density = 1e-3;       // rad/s/sqrt(Hz)
  double accel_bias_walk = 1e-4;    // m/s^3/sqrt(Hz)
  double gyro_bias_walk = 1e-5;     // rad/s^2/sqrt(Hz)

  // encoder noise, per sample
  double joint_angle_sigma = 5e-4;  // rad
  double joint_rate_sigma = 2e-2;   // rad/s

  // measurement variances per residual block (diagonal of Sigma_w)
  double fk_pos_var = 4e-6;         // m^2
  double fk_ori_var = 2.5e-5;       // rad^2
  double lo_vel_var = 4e-4;         // (m/s)^2
  double pivot_var = 4e-4;          // (m/s)^2
  double grav_var = 2.5e-1;         // (m/s^2)^2

  // contact-based covariance scaling, sigma_s = c*sigma_c + (1-c)*sigma_n
  double sigma_c = 1e-9;            // stance foot-position process variance, m^2/step
  double sigma_n = 1e-3;            // swing value, must be >> sigma_c

  // gate threshold on the Mahalanobis norm ||y||_S of the 3-dim pivoting
  // residual; default is sqrt of the chi-square(3) 95th percentile
  double mahalanobis_sigma = 2.7955;

  // gravity vector convention: world z up, g^w = [0, 0, +9.81], so the
  // velocity row of the process model reads v' = v + dt*(R a - g^w)
  Vec3 gravity = Vec3(0.0, 0.0, 9.81);

  bool valid() const {
    return accel_density > 0 && gyro_density > 0 && accel_bias_walk > 0 &&
           gyro_bias_walk > 0 && fk_pos_var > 0 && fk_ori_var > 0 &&
           lo_vel_var > 0 && pivot_var > 0 && grav_var > 0 && sigma_c > 0 &&
           sigma_n > 0 && mahalanobis_sigma > 0 && gravity(2) > 0;
  }
};

}  // namespace mipo
