#include "mipo/sipo.hpp"

#include <cmath>

namespace mipo {

namespace {

// exact differentials of the first-order quaternion retraction
Mat3 rotation_error_transition(const Vec3& omega, double dt) {
  return rot_of(quat_exp(omega * dt)).transpose();
}

Mat3 rotation_bias_coupling(const Vec3& omega, double dt) {
  const Vec3 a = omega * dt;
  const double h2 = 1.0 + 0.25 * a.squaredNorm();
  return -dt * (Mat3::Identity() - 0.5 * skew(a)) / h2;
}

}  // namespace

SipoState sipo_init(const SipoConfig& cfg, double t, const Vec3& p,
                    const Vec3& v, const UnitQuaternion& q,
                    const std::vector<Vec3>& foot_positions) {
  SipoState x;
  x.t = t;
  x.p = p;
  x.v = v;
  x.q = q;
  x.s = foot_positions;
  const int n = cfg.error_dim();
  x.P = MatrixXd::Zero(n, n);
  x.P.block<3, 3>(0, 0) = cfg.p0_pos * Mat3::Identity();
  x.P.block<3, 3>(3, 3) = cfg.p0_vel * Mat3::Identity();
  x.P.block<3, 3>(6, 6) = cfg.p0_ori * Mat3::Identity();
  if (cfg.estimate_biases) {
    x.P.block<6, 6>(9, 9) = cfg.p0_bias * Eigen::MatrixXd::Identity(6, 6);
  }
  for (int j = 0; j < cfg.num_legs(); ++j) {
    x.P.block<3, 3>(cfg.foot_index(j), cfg.foot_index(j)) =
        cfg.p0_foot * Mat3::Identity();
  }
  return x;
}

SipoState sipo_predict_mean(const SipoConfig& cfg, const SipoState& x,
                            const SensorRecord& z, double dt) {
  const Vec3 ba = cfg.estimate_biases ? x.ba : cfg.fixed_bias_accel;
  const Vec3 bg = cfg.estimate_biases ? x.bg : cfg.fixed_bias_gyro;
  const Vec3 acc = z.accel_body - ba;
  const Vec3 omega = z.gyro_body - bg;

  SipoState out = x;
  out.t = x.t + dt;
  out.p = x.p + dt * x.v;
  out.v = x.v + dt * (rot_of(x.q) * acc - cfg.noise.gravity);
  out.q = x.q * quat_exp(omega * dt);
  return out;
}

MatrixXd sipo_process_jacobian(const SipoConfig& cfg, const SipoState& x,
                               const SensorRecord& z, double dt) {
  const int n = cfg.error_dim();
  const Vec3 ba = cfg.estimate_biases ? x.ba : cfg.fixed_bias_accel;
  const Vec3 bg = cfg.estimate_biases ? x.bg : cfg.fixed_bias_gyro;
  const Vec3 acc = z.accel_body - ba;
  const Vec3 omega = z.gyro_body - bg;
  const Mat3 r = rot_of(x.q);

  MatrixXd f = MatrixXd::Identity(n, n);
  f.block<3, 3>(0, 3) = dt * Mat3::Identity();
  f.block<3, 3>(3, 6) = -dt * r * skew(acc);
  f.block<3, 3>(6, 6) = rotation_error_transition(omega, dt);
  if (cfg.estimate_biases) {
    f.block<3, 3>(3, 9) = -dt * r;
    f.block<3, 3>(6, 12) = rotation_bias_coupling(omega, dt);
  }
  return f;
}

SipoState sipo_predict(const SipoConfig& cfg, const SipoState& x,
                       const SensorRecord& z, double dt) {
  if (!z.accel_body.allFinite() || !z.gyro_body.allFinite() || dt <= 0.0) {
    SipoState out = x;  // rejected, state held
    return out;
  }
  SipoState out = sipo_predict_mean(cfg, x, z, dt);
  const MatrixXd f = sipo_process_jacobian(cfg, x, z, dt);

  const int n = cfg.error_dim();
  VectorXd qn = VectorXd::Zero(n);
  const NoiseConfig& nc = cfg.noise;
  qn.segment<3>(0).setConstant(1e-12 * dt);
  qn.segment<3>(3).setConstant(nc.accel_density * nc.accel_density * dt);
  qn.segment<3>(6).setConstant(nc.gyro_density * nc.gyro_density * dt);
  if (cfg.estimate_biases) {
    qn.segment<3>(9).setConstant(nc.accel_bias_walk * nc.accel_bias_walk * dt);
    qn.segment<3>(12).setConstant(nc.gyro_bias_walk * nc.gyro_bias_walk * dt);
  }
  for (int j = 0; j < cfg.num_legs(); ++j) {
    const double c = j < static_cast<int>(z.legs.size()) ? z.legs[j].contact : 0.0;
    const double sigma_s = c * nc.sigma_c + (1.0 - c) * nc.sigma_n;
    qn.segment<3>(cfg.foot_index(j)).setConstant(sigma_s);
  }

  out.P = f * x.P * f.transpose();
  out.P.diagonal() += qn;
  out.P = 0.5 * (out.P + out.P.transpose());
  return out;
}

SipoMeasurement sipo_measure(const SipoConfig& cfg, const SipoState& x,
                             const SensorRecord& z) {
  const int n = cfg.error_dim();
  const int num_legs = cfg.num_legs();
  const Mat3 r = rot_of(x.q);
  const Vec3 bg = cfg.estimate_biases ? x.bg : cfg.fixed_bias_gyro;
  const Vec3 omega = z.gyro_body - bg;

  SipoMeasurement m;
  m.residual = VectorXd::Zero(6 * num_legs);
  m.H = MatrixXd::Zero(6 * num_legs, n);
  m.var = VectorXd::Zero(6 * num_legs);

  for (int j = 0; j < num_legs; ++j) {
    const auto& ch = z.legs[j];
    const LegModel& model = cfg.legs[j];
    const Vec3 g_vec = fk_position(model, ch.joint_angle);
    const Mat3 jac = fk_jacobian(model, ch.joint_angle);
    const int row = 6 * j;
    const int sj = cfg.foot_index(j);

    // foot position from forward kinematics
    m.residual.segment<3>(row) = g_vec - r.transpose() * (x.s[j] - x.p);
    m.H.block<3, 3>(row, 0) = -r.transpose();
    m.H.block<3, 3>(row, 6) = skew(r.transpose() * (x.s[j] - x.p));
    m.H.block<3, 3>(row, sj) = r.transpose();

    // zero-velocity LO observation
    m.residual.segment<3>(row + 3) = -jac * ch.joint_rate -
                                     omega.cross(g_vec) -
                                     r.transpose() * x.v;
    m.H.block<3, 3>(row + 3, 3) = r.transpose();
    m.H.block<3, 3>(row + 3, 6) = skew(r.transpose() * x.v);
    if (cfg.estimate_biases) {
      m.H.block<3, 3>(row + 3, 12) = skew(g_vec);
    }

    // contact-based inflation of the measurement covariance
    const double scale =
        ch.contact > 0.5 ? 1.0 : cfg.noise.sigma_n / cfg.noise.sigma_c;
    m.var.segment<3>(row).setConstant(cfg.noise.fk_pos_var * scale);
    m.var.segment<3>(row + 3).setConstant(cfg.noise.lo_vel_var * scale);
  }
  return m;
}

namespace {

void sipo_retract(const SipoConfig& cfg, SipoState* x, const VectorXd& dx) {
  x->p += dx.segment<3>(0);
  x->v += dx.segment<3>(3);
  x->q = x->q * quat_exp(dx.segment<3>(6));
  if (cfg.estimate_biases) {
    x->ba += dx.segment<3>(9);
    x->bg += dx.segment<3>(12);
  }
  for (int j = 0; j < cfg.num_legs(); ++j) {
    x->s[j] += dx.segment<3>(cfg.foot_index(j));
  }
}

}  // namespace

SipoState sipo_step(const SipoConfig& cfg, const SipoState& x,
                    const SensorRecord& z, double dt, SipoStepInfo* info,
                    MatrixXd* F_out, MatrixXd* H_out, VectorXd* var_out) {
  if (!z.finite() || dt <= 0.0) {
    if (info) info->update_applied = false;
    return x;
  }
  if (F_out) *F_out = sipo_process_jacobian(cfg, x, z, dt);
  SipoState pred = sipo_predict(cfg, x, z, dt);
  const SipoMeasurement m = sipo_measure(cfg, pred, z);
  if (H_out) *H_out = m.H;
  if (var_out) *var_out = m.var;

  MatrixXd s_mat = m.H * pred.P * m.H.transpose();
  s_mat.diagonal() += m.var;
  s_mat = 0.5 * (s_mat + s_mat.transpose());
  Eigen::LDLT<MatrixXd> ldlt(s_mat);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    if (info) info->update_applied = false;
    return pred;
  }
  if (info) info->update_applied = true;

  const MatrixXd pht = pred.P * m.H.transpose();
  const MatrixXd k = ldlt.solve(pht.transpose()).transpose();
  const VectorXd dx = k * m.residual;

  SipoState out = pred;
  sipo_retract(cfg, &out, dx);
  const int n = cfg.error_dim();
  const MatrixXd ikh = MatrixXd::Identity(n, n) - k * m.H;
  out.P = ikh * pred.P * ikh.transpose() +
          k * m.var.asDiagonal() * k.transpose();
  out.P = 0.5 * (out.P + out.P.transpose());
  return out;
}

SipoState sipo_boxplus(const SipoConfig& cfg, const SipoState& x,
                       const VectorXd& dx) {
  SipoState out = x;
  sipo_retract(cfg, &out, dx);
  return out;
}

VectorXd sipo_boxminus(const SipoConfig& cfg, const SipoState& a,
                       const SipoState& b) {
  VectorXd d(cfg.error_dim());
  d.segment<3>(0) = a.p - b.p;
  d.segment<3>(3) = a.v - b.v;
  d.segment<3>(6) = quat_log(b.q.inverse() * a.q);
  if (cfg.estimate_biases) {
    d.segment<3>(9) = a.ba - b.ba;
    d.segment<3>(12) = a.bg - b.bg;
  }
  for (int j = 0; j < cfg.num_legs(); ++j) {
    d.segment<3>(cfg.foot_index(j)) = a.s[j] - b.s[j];
  }
  return d;
}

SipoState sipo_yaw_update(const SipoConfig& cfg, const SipoState& x,
                          double yaw_meas, double yaw_var) {
  const int n = cfg.error_dim();
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(n);
  h.segment<3>(6) = yaw_error_jacobian(x.q);
  const double s = (h * x.P * h.transpose())(0) + yaw_var;
  const VectorXd k = x.P * h.transpose() / s;
  const double innov = wrap_angle(yaw_meas - yaw_of(x.q));

  SipoState out = x;
  sipo_retract(cfg, &out, k * innov);
  const MatrixXd ikh = MatrixXd::Identity(n, n) - k * h;
  out.P = ikh * x.P * ikh.transpose() + k * yaw_var * k.transpose();
  out.P = 0.5 * (out.P + out.P.transpose());
  return out;
}

}  // namespace mipo
