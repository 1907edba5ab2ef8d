#include "mipo/jacobian_check.hpp"

#include <cmath>

namespace mipo {

namespace {

Vec3 gauss3(std::mt19937_64* rng, double sigma) {
  std::normal_distribution<double> g(0.0, sigma);
  return Vec3(g(*rng), g(*rng), g(*rng));
}

UnitQuaternion random_quat(std::mt19937_64* rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return UnitQuaternion(g(*rng), Vec3(g(*rng), g(*rng), g(*rng)));
}

Vec3 random_joint_angles(std::mt19937_64* rng) {
  std::uniform_real_distribution<double> roll(-0.5, 0.5);
  std::uniform_real_distribution<double> pitch(0.2, 1.2);
  std::uniform_real_distribution<double> knee(-2.2, -0.6);
  return Vec3(roll(*rng), pitch(*rng), knee(*rng));
}

}  // namespace

MipoState random_mipo_state(const MipoConfig& cfg, std::mt19937_64* rng) {
  const int e = cfg.num_legs();
  MipoState x;
  x.p = gauss3(rng, 1.0);
  x.v = gauss3(rng, 0.5);
  x.q = random_quat(rng);
  x.ba = gauss3(rng, 0.1);
  x.bg = gauss3(rng, 0.05);
  x.s.resize(e);
  x.ds.resize(e);
  x.qf.resize(e);
  x.bs.resize(e);
  x.bt.resize(e);
  for (int j = 0; j < e; ++j) {
    x.s[j] = x.p + rot_of(x.q) * (fk_position(cfg.legs[j], Vec3(0, 0.5, -1.0)) +
                                  gauss3(rng, 0.05));
    x.ds[j] = gauss3(rng, 0.3);
    x.qf[j] = random_quat(rng);
    x.bs[j] = gauss3(rng, 0.1);
    x.bt[j] = gauss3(rng, 0.05);
  }
  x.P = MatrixXd::Identity(cfg.error_dim(), cfg.error_dim());
  return x;
}

SensorRecord random_sensor_record(const MipoConfig& cfg,
                                  std::mt19937_64* rng) {
  SensorRecord z;
  z.accel_body = gauss3(rng, 2.0) + Vec3(0, 0, 9.81);
  z.gyro_body = gauss3(rng, 1.0);
  z.legs.resize(cfg.num_legs());
  for (auto& ch : z.legs) {
    ch.accel_foot = gauss3(rng, 2.0) + Vec3(0, 0, 9.81);
    ch.gyro_foot = gauss3(rng, 1.0);
    ch.joint_angle = random_joint_angles(rng);
    ch.joint_rate = gauss3(rng, 2.0);
    ch.contact = 1.0;
  }
  return z;
}

MatrixXd fd_process_jacobian(const MipoConfig& cfg, const MipoState& x,
                             const SensorRecord& z, double dt, double eps) {
  const int n = cfg.error_dim();
  const MipoState base = mipo_predict_mean(cfg, x, z, dt);
  MatrixXd fd(n, n);
  VectorXd dx = VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    dx(i) = eps;
    const MipoState plus = mipo_predict_mean(cfg, mipo_boxplus(cfg, x, dx), z, dt);
    dx(i) = -eps;
    const MipoState minus = mipo_predict_mean(cfg, mipo_boxplus(cfg, x, dx), z, dt);
    dx(i) = 0.0;
    fd.col(i) = (mipo_boxminus(cfg, plus, base) -
                 mipo_boxminus(cfg, minus, base)) /
                (2.0 * eps);
  }
  return fd;
}

MatrixXd fd_measurement_jacobian(const MipoConfig& cfg, const MipoState& x,
                                 const SensorRecord& z, double eps) {
  const int n = cfg.error_dim();
  const int rows = 15 * cfg.num_legs();
  MatrixXd fd(rows, n);
  VectorXd dx = VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    dx(i) = eps;
    const VectorXd rp = mipo_stacked_residual(cfg, mipo_boxplus(cfg, x, dx), z);
    dx(i) = -eps;
    const VectorXd rm = mipo_stacked_residual(cfg, mipo_boxplus(cfg, x, dx), z);
    dx(i) = 0.0;
    fd.col(i) = (rp - rm) / (2.0 * eps);
  }
  return fd;
}

JacobianCheckReport run_jacobian_check(const MipoConfig& cfg, int num_states,
                                       unsigned seed, double dt) {
  std::mt19937_64 rng(seed);
  JacobianCheckReport rep;
  rep.states = num_states;

  for (int it = 0; it < num_states; ++it) {
    MipoState x = random_mipo_state(cfg, &rng);
    SensorRecord z = random_sensor_record(cfg, &rng);

    // keep the FK-orientation product and the pivot direction away from the
    // branch cut and the degenerate geometry
    for (int j = 0; j < cfg.num_legs(); ++j) {
      const UnitQuaternion q_alpha =
          fk_orientation(cfg.legs[j], z.legs[j].joint_angle);
      const UnitQuaternion rel = q_alpha.inverse() * x.q.inverse() * x.qf[j];
      if (std::abs(rel.scalar()) < 0.05) {
        x.qf[j] = x.qf[j] * quat_exp_exact(Vec3(0.3, 0, 0));
      }
    }

    const MatrixXd f_ana = mipo_process_jacobian(cfg, x, z, dt);
    const MatrixXd f_fd = fd_process_jacobian(cfg, x, z, dt);
    const double f_scale = std::max(1.0, f_ana.cwiseAbs().maxCoeff());
    rep.max_f_err = std::max(
        rep.max_f_err, (f_fd - f_ana).cwiseAbs().maxCoeff() / f_scale);

    const MatrixXd h_ana = mipo_stacked_h(cfg, x, z);
    const MatrixXd r_fd = fd_measurement_jacobian(cfg, x, z);
    const double h_scale = std::max(1.0, h_ana.cwiseAbs().maxCoeff());
    rep.max_h_err = std::max(
        rep.max_h_err, (r_fd + h_ana).cwiseAbs().maxCoeff() / h_scale);

    // appendix orientation blocks, checked against the FD of the FK
    // orientation rows alone
    for (int j = 0; j < cfg.num_legs(); ++j) {
      const UnitQuaternion q_alpha =
          fk_orientation(cfg.legs[j], z.legs[j].joint_angle);
      const UnitQuaternion rel = q_alpha.inverse() * x.q.inverse() * x.qf[j];
      const double sc = rel.scalar() < 0.0 ? -1.0 : 1.0;
      const Mat3 body_block =
          -sc * vec_block(lmap(x.qf[j].inverse() * x.q) * rmap(q_alpha));
      const Mat3 foot_block = sc * vec_block(lmap(rel));
      const int row = 15 * j + 3;
      const Mat3 fd_body = -r_fd.block<3, 3>(row, kTheta);
      const Mat3 fd_foot =
          -r_fd.block<3, 3>(row, cfg.leg_base(j) + kTheta);
      rep.max_appendix_err =
          std::max({rep.max_appendix_err,
                    (fd_body - body_block).cwiseAbs().maxCoeff(),
                    (fd_foot - foot_block).cwiseAbs().maxCoeff()});
    }
  }
  return rep;
}

}  // namespace mipo
