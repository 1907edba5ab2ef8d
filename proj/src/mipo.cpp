#include "mipo/mipo.hpp"

#include <cmath>

namespace mipo {

namespace {

Mat3 rotation_error_transition(const Vec3& omega, double dt) {
  return rot_of(quat_exp(omega * dt)).transpose();
}

Mat3 rotation_bias_coupling(const Vec3& omega, double dt) {
  const Vec3 a = omega * dt;
  const double h2 = 1.0 + 0.25 * a.squaredNorm();
  return -dt * (Mat3::Identity() - 0.5 * skew(a)) / h2;
}

// one rigid link's 15x15 error transition (shared by body and feet)
void fill_link_jacobian(Eigen::Ref<MatrixXd> f, const Mat3& r, const Vec3& acc,
                        const Vec3& omega, double dt) {
  f.setIdentity();
  f.block<3, 3>(kPos, kVel) = dt * Mat3::Identity();
  f.block<3, 3>(kVel, kTheta) = -dt * r * skew(acc);
  f.block<3, 3>(kVel, kBiasA) = -dt * r;
  f.block<3, 3>(kTheta, kTheta) = rotation_error_transition(omega, dt);
  f.block<3, 3>(kTheta, kBiasG) = rotation_bias_coupling(omega, dt);
}

}  // namespace

MipoState mipo_init(const MipoConfig& cfg, double t, const Vec3& p,
                    const Vec3& v, const UnitQuaternion& q,
                    const std::vector<Vec3>& foot_pos,
                    const std::vector<Vec3>& foot_vel,
                    const std::vector<UnitQuaternion>& foot_q) {
  const int e = cfg.num_legs();
  MipoState x;
  x.t = t;
  x.p = p;
  x.v = v;
  x.q = q;
  x.s = foot_pos;
  x.ds = foot_vel;
  x.qf = foot_q;
  x.bs.assign(e, Vec3::Zero());
  x.bt.assign(e, Vec3::Zero());

  const int n = cfg.error_dim();
  x.P = MatrixXd::Zero(n, n);
  x.P.block<3, 3>(kPos, kPos) = cfg.p0_pos * Mat3::Identity();
  x.P.block<3, 3>(kVel, kVel) = cfg.p0_vel * Mat3::Identity();
  x.P.block<3, 3>(kTheta, kTheta) = cfg.p0_ori * Mat3::Identity();
  x.P.block<3, 3>(kBiasA, kBiasA) = cfg.p0_bias * Mat3::Identity();
  x.P.block<3, 3>(kBiasG, kBiasG) = cfg.p0_bias * Mat3::Identity();
  for (int j = 0; j < e; ++j) {
    const int b = cfg.leg_base(j);
    x.P.block<3, 3>(b + kPos, b + kPos) = cfg.p0_foot_pos * Mat3::Identity();
    x.P.block<3, 3>(b + kVel, b + kVel) = cfg.p0_foot_vel * Mat3::Identity();
    x.P.block<3, 3>(b + kTheta, b + kTheta) =
        cfg.p0_foot_ori * Mat3::Identity();
    x.P.block<3, 3>(b + kBiasA, b + kBiasA) =
        cfg.p0_foot_bias * Mat3::Identity();
    x.P.block<3, 3>(b + kBiasG, b + kBiasG) =
        cfg.p0_foot_bias * Mat3::Identity();
  }
  return x;
}

MipoState mipo_predict_mean(const MipoConfig& cfg, const MipoState& x,
                            const SensorRecord& z, double dt,
                            bool* saturation) {
  MipoState out = x;
  out.t = x.t + dt;
  const Vec3& g = cfg.noise.gravity;

  const Vec3 acc = z.accel_body - x.ba;
  const Vec3 omega = z.gyro_body - x.bg;
  out.p = x.p + dt * x.v;
  out.v = x.v + dt * (rot_of(x.q) * acc - g);
  out.q = x.q * quat_exp(omega * dt);

  if (saturation) *saturation = false;
  for (int j = 0; j < x.num_legs(); ++j) {
    const auto& ch = z.legs[j];
    if (saturation &&
        ch.accel_foot.cwiseAbs().maxCoeff() >= cfg.saturation_limit * 0.999) {
      *saturation = true;
    }
    const Vec3 acc_f = ch.accel_foot - x.bs[j];
    const Vec3 omega_f = ch.gyro_foot - x.bt[j];
    out.s[j] = x.s[j] + dt * x.ds[j];
    out.ds[j] = x.ds[j] + dt * (rot_of(x.qf[j]) * acc_f - g);
    out.qf[j] = x.qf[j] * quat_exp(omega_f * dt);
  }
  return out;
}

MatrixXd mipo_process_jacobian(const MipoConfig& cfg, const MipoState& x,
                               const SensorRecord& z, double dt) {
  const int n = cfg.error_dim();
  MatrixXd f = MatrixXd::Zero(n, n);
  fill_link_jacobian(f.topLeftCorner<kBlockDim, kBlockDim>(), rot_of(x.q),
                     z.accel_body - x.ba, z.gyro_body - x.bg, dt);
  for (int j = 0; j < x.num_legs(); ++j) {
    const int b = cfg.leg_base(j);
    fill_link_jacobian(f.block<kBlockDim, kBlockDim>(b, b),
                       rot_of(x.qf[j]), z.legs[j].accel_foot - x.bs[j],
                       z.legs[j].gyro_foot - x.bt[j], dt);
  }
  return f;
}

MipoState mipo_predict(const MipoConfig& cfg, const MipoState& x,
                       const SensorRecord& z, double dt, bool* saturation) {
  MipoState out = mipo_predict_mean(cfg, x, z, dt, saturation);
  const MatrixXd f = mipo_process_jacobian(cfg, x, z, dt);

  const NoiseConfig& nc = cfg.noise;
  const int n = cfg.error_dim();
  VectorXd qn = VectorXd::Zero(n);
  auto fill_block_noise = [&](int base) {
    qn.segment<3>(base + kPos).setConstant(1e-12 * dt);
    qn.segment<3>(base + kVel)
        .setConstant(nc.accel_density * nc.accel_density * dt);
    qn.segment<3>(base + kTheta)
        .setConstant(nc.gyro_density * nc.gyro_density * dt);
    qn.segment<3>(base + kBiasA)
        .setConstant(nc.accel_bias_walk * nc.accel_bias_walk * dt);
    qn.segment<3>(base + kBiasG)
        .setConstant(nc.gyro_bias_walk * nc.gyro_bias_walk * dt);
  };
  fill_block_noise(0);
  for (int j = 0; j < x.num_legs(); ++j) fill_block_noise(cfg.leg_base(j));

  out.P = f * x.P * f.transpose();
  out.P.diagonal() += qn;
  out.P = 0.5 * (out.P + out.P.transpose());
  return out;
}

bool pivoting_velocity(const LegModel& model, const UnitQuaternion& q,
                       const UnitQuaternion& qf, const Vec3& bt,
                       const Vec3& gyro_foot, const Vec3& joint_angle,
                       Vec3* s_dot) {
  const Vec3 n = rot_of(q) * fk_position(model, joint_angle);
  const double nn = n.norm();
  if (nn < 1e-6) return false;
  const Vec3 dp = -model.d0 * n / nn;
  const Vec3 omega_p = rot_of(qf) * (gyro_foot - bt);
  *s_dot = omega_p.cross(dp);
  return true;
}

MipoMeasurement mipo_measure(const MipoConfig& cfg, const MipoState& x,
                             const SensorRecord& z) {
  MipoMeasurement out;
  out.legs.resize(x.num_legs());
  const Mat3 r = rot_of(x.q);
  const Vec3 omega = z.gyro_body - x.bg;
  const Vec3& g = cfg.noise.gravity;

  for (int j = 0; j < x.num_legs(); ++j) {
    const auto& ch = z.legs[j];
    const LegModel& model = cfg.legs[j];
    LegMeasurement& m = out.legs[j];
    m.Hb.setZero();
    m.Hf.setZero();
    m.residual.setZero();

    const Vec3 g_vec = fk_position(model, ch.joint_angle);
    const Mat3 jac = fk_jacobian(model, ch.joint_angle);
    const UnitQuaternion q_alpha = fk_orientation(model, ch.joint_angle);
    const Mat3 rf = rot_of(x.qf[j]);

    // kinematic foot position
    m.residual.segment<3>(0) = g_vec - r.transpose() * (x.s[j] - x.p);
    m.Hb.block<3, 3>(0, kPos) = -r.transpose();
    m.Hb.block<3, 3>(0, kTheta) = skew(r.transpose() * (x.s[j] - x.p));
    m.Hf.block<3, 3>(0, kPos) = r.transpose();

    // forward-kinematics orientation, Log(q(α)^-1 ⊗ q^-1 ⊗ q_f)
    const UnitQuaternion x_rel = q_alpha.inverse() * x.q.inverse() * x.qf[j];
    const double sc = x_rel.scalar() < 0.0 ? -1.0 : 1.0;
    m.residual.segment<3>(3) = -sc * 2.0 * x_rel.vec();
    m.Hb.block<3, 3>(3, kTheta) =
        -sc * vec_block(lmap(x.qf[j].inverse() * x.q) * rmap(q_alpha));
    m.Hf.block<3, 3>(3, kTheta) = sc * vec_block(lmap(x_rel));

    // LO velocity without the zero-velocity assumption
    m.residual.segment<3>(6) = jac * ch.joint_rate + omega.cross(g_vec) +
                               r.transpose() * (x.v - x.ds[j]);
    m.Hb.block<3, 3>(6, kVel) = -r.transpose();
    m.Hb.block<3, 3>(6, kTheta) = skew(r.transpose() * (x.ds[j] - x.v));
    m.Hb.block<3, 3>(6, kBiasG) = -skew(g_vec);
    m.Hf.block<3, 3>(6, kVel) = r.transpose();

    // pivoting contact model
    const Vec3 n = r * g_vec;
    const double nn = n.norm();
    if (nn < 1e-6) {
      m.pivot_degenerate = true;
    } else {
      const Vec3 n_hat = n / nn;
      const Vec3 dp = -model.d0 * n_hat;
      const Vec3 omega_tilde = ch.gyro_foot - x.bt[j];
      const Vec3 omega_p = rf * omega_tilde;
      m.residual.segment<3>(9) = omega_p.cross(dp) - x.ds[j];
      // exact derivative of d_p through n = R g(α), unit-normalization included
      const Mat3 d_dp_dtheta = (model.d0 / nn) *
                               (Mat3::Identity() - n_hat * n_hat.transpose()) *
                               r * skew(g_vec);
      m.Hb.block<3, 3>(9, kTheta) = -skew(omega_p) * d_dp_dtheta;
      m.Hf.block<3, 3>(9, kVel) = Mat3::Identity();
      m.Hf.block<3, 3>(9, kTheta) = -skew(dp) * rf * skew(omega_tilde);
      m.Hf.block<3, 3>(9, kBiasG) = -skew(dp) * rf;
    }

    // gravity direction seen by the foot accelerometer
    m.residual.segment<3>(12) = ch.accel_foot - rf.transpose() * g - x.bs[j];
    m.Hf.block<3, 3>(12, kTheta) = skew(rf.transpose() * g);
    m.Hf.block<3, 3>(12, kBiasA) = Mat3::Identity();

    m.var.segment<3>(0).setConstant(cfg.noise.fk_pos_var);
    m.var.segment<3>(3).setConstant(cfg.noise.fk_ori_var);
    m.var.segment<3>(6).setConstant(cfg.noise.lo_vel_var);
    m.var.segment<3>(9).setConstant(cfg.noise.pivot_var);
    m.var.segment<3>(12).setConstant(cfg.noise.grav_var);
  }
  return out;
}

bool contact_gate(double mahalanobis_norm, double sigma) {
  return mahalanobis_norm < sigma;
}

MatrixXd leg_rows_to_full(const MipoConfig& cfg, int leg,
                          const Eigen::Matrix<double, 15, 15>& Hb,
                          const Eigen::Matrix<double, 15, 15>& Hf,
                          int row_begin, int row_count) {
  MatrixXd h = MatrixXd::Zero(row_count, cfg.error_dim());
  h.block(0, 0, row_count, kBlockDim) = Hb.block(row_begin, 0, row_count, 15);
  h.block(0, cfg.leg_base(leg), row_count, kBlockDim) =
      Hf.block(row_begin, 0, row_count, 15);
  return h;
}

namespace {

void mipo_retract(const MipoConfig& cfg, MipoState* x, const VectorXd& dx) {
  x->p += dx.segment<3>(kPos);
  x->v += dx.segment<3>(kVel);
  x->q = x->q * quat_exp(dx.segment<3>(kTheta));
  x->ba += dx.segment<3>(kBiasA);
  x->bg += dx.segment<3>(kBiasG);
  for (int j = 0; j < x->num_legs(); ++j) {
    const int b = cfg.leg_base(j);
    x->s[j] += dx.segment<3>(b + kPos);
    x->ds[j] += dx.segment<3>(b + kVel);
    x->qf[j] = x->qf[j] * quat_exp(dx.segment<3>(b + kTheta));
    x->bs[j] += dx.segment<3>(b + kBiasA);
    x->bt[j] += dx.segment<3>(b + kBiasG);
  }
}

}  // namespace

MipoState mipo_step(const MipoConfig& cfg, const MipoState& x,
                    const SensorRecord& z, double dt, UpdateDiagnostics* diag,
                    MatrixXd* F_out, MatrixXd* H_out, VectorXd* var_out) {
  const int e = x.num_legs();
  const int n = cfg.error_dim();
  if (!z.finite() || dt <= 0.0) {
    if (diag) diag->update_skipped = true;
    return x;
  }
  if (F_out) *F_out = mipo_process_jacobian(cfg, x, z, dt);

  bool saturated = false;
  MipoState pred = mipo_predict(cfg, x, z, dt, &saturated);
  const MipoMeasurement meas = mipo_measure(cfg, pred, z);

  UpdateDiagnostics local;
  UpdateDiagnostics& d = diag ? *diag : local;
  d.mahalanobis.assign(e, 0.0);
  d.gate.assign(e, false);
  d.degenerate.assign(e, false);
  d.saturation_flagged = saturated;
  d.update_skipped = false;

  // gate each leg on the pivoting block before applying any update, so the
  // decisions match a single stacked update
  std::vector<int> rows_of(e, 9);
  for (int j = 0; j < e; ++j) {
    const LegMeasurement& m = meas.legs[j];
    if (m.pivot_degenerate) {
      d.degenerate[j] = true;
      d.mahalanobis[j] = std::numeric_limits<double>::infinity();
      continue;
    }
    const MatrixXd hp = leg_rows_to_full(cfg, j, m.Hb, m.Hf, 9, 3);
    Mat3 s_p = (hp * pred.P * hp.transpose());
    s_p.diagonal() += m.var.segment<3>(9);
    const Vec3 y_p = m.residual.segment<3>(9);
    d.mahalanobis[j] = std::sqrt(y_p.dot(s_p.ldlt().solve(y_p)));
    d.gate[j] = contact_gate(d.mahalanobis[j], cfg.noise.mahalanobis_sigma);
    if (d.gate[j]) rows_of[j] = 15;  // include pivot + gravity rows
  }

  // sequential per-leg updates on a fixed linearization; equivalent to the
  // stacked update for block-diagonal Sigma_w
  MipoState out = pred;
  VectorXd dx_acc = VectorXd::Zero(n);
  int total_rows = 0;
  for (int j = 0; j < e; ++j) total_rows += rows_of[j];
  VectorXd innov_all(total_rows);
  MatrixXd h_all(total_rows, n);
  VectorXd var_all(total_rows);
  int cursor = 0;

  for (int j = 0; j < e; ++j) {
    const LegMeasurement& m = meas.legs[j];
    const int rows = rows_of[j];
    const MatrixXd h = leg_rows_to_full(cfg, j, m.Hb, m.Hf, 0, rows);
    const VectorXd y0 = m.residual.head(rows);
    const VectorXd var = m.var.head(rows);

    innov_all.segment(cursor, rows) = y0;
    h_all.middleRows(cursor, rows) = h;
    var_all.segment(cursor, rows) = var;
    cursor += rows;

    const VectorXd y_eff = y0 - h * dx_acc;
    MatrixXd s_mat = h * out.P * h.transpose();
    s_mat.diagonal() += var;
    s_mat = 0.5 * (s_mat + s_mat.transpose());
    Eigen::LDLT<MatrixXd> ldlt(s_mat);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      d.update_skipped = true;
      continue;
    }
    const MatrixXd pht = out.P * h.transpose();
    const MatrixXd k = ldlt.solve(pht.transpose()).transpose();
    dx_acc += k * y_eff;
    const MatrixXd ikh = MatrixXd::Identity(n, n) - k * h;
    out.P = ikh * out.P * ikh.transpose() + k * var.asDiagonal() * k.transpose();
    out.P = 0.5 * (out.P + out.P.transpose());
  }

  mipo_retract(cfg, &out, dx_acc);
  d.innovation = innov_all;
  MatrixXd s_all = h_all * pred.P * h_all.transpose();
  s_all.diagonal() += var_all;
  d.innovation_cov = 0.5 * (s_all + s_all.transpose());
  if (H_out) *H_out = h_all;
  if (var_out) *var_out = var_all;
  return out;
}

MipoState mipo_boxplus(const MipoConfig& cfg, const MipoState& x,
                       const VectorXd& dx) {
  MipoState out = x;
  mipo_retract(cfg, &out, dx);
  return out;
}

VectorXd mipo_boxminus(const MipoConfig& cfg, const MipoState& a,
                       const MipoState& b) {
  VectorXd d(cfg.error_dim());
  d.segment<3>(kPos) = a.p - b.p;
  d.segment<3>(kVel) = a.v - b.v;
  d.segment<3>(kTheta) = quat_log(b.q.inverse() * a.q);
  d.segment<3>(kBiasA) = a.ba - b.ba;
  d.segment<3>(kBiasG) = a.bg - b.bg;
  for (int j = 0; j < a.num_legs(); ++j) {
    const int base = cfg.leg_base(j);
    d.segment<3>(base + kPos) = a.s[j] - b.s[j];
    d.segment<3>(base + kVel) = a.ds[j] - b.ds[j];
    d.segment<3>(base + kTheta) = quat_log(b.qf[j].inverse() * a.qf[j]);
    d.segment<3>(base + kBiasA) = a.bs[j] - b.bs[j];
    d.segment<3>(base + kBiasG) = a.bt[j] - b.bt[j];
  }
  return d;
}

VectorXd mipo_stacked_residual(const MipoConfig& cfg, const MipoState& x,
                               const SensorRecord& z) {
  const MipoMeasurement m = mipo_measure(cfg, x, z);
  VectorXd r(15 * x.num_legs());
  for (int j = 0; j < x.num_legs(); ++j) {
    r.segment<15>(15 * j) = m.legs[j].residual;
  }
  return r;
}

MatrixXd mipo_stacked_h(const MipoConfig& cfg, const MipoState& x,
                        const SensorRecord& z) {
  const MipoMeasurement m = mipo_measure(cfg, x, z);
  MatrixXd h = MatrixXd::Zero(15 * x.num_legs(), cfg.error_dim());
  for (int j = 0; j < x.num_legs(); ++j) {
    h.middleRows<15>(15 * j) =
        leg_rows_to_full(cfg, j, m.legs[j].Hb, m.legs[j].Hf, 0, 15);
  }
  return h;
}

MipoState mipo_yaw_update(const MipoConfig& cfg, const MipoState& x,
                          double yaw_meas, double yaw_var) {
  const int n = cfg.error_dim();
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(n);
  h.segment<3>(kTheta) = yaw_error_jacobian(x.q);
  const double s = (h * x.P * h.transpose())(0) + yaw_var;
  const VectorXd k = x.P * h.transpose() / s;
  const double innov = wrap_angle(yaw_meas - yaw_of(x.q));

  MipoState out = x;
  mipo_retract(cfg, &out, k * innov);
  const MatrixXd ikh = MatrixXd::Identity(n, n) - k * h;
  out.P = ikh * x.P * ikh.transpose() + k * yaw_var * k.transpose();
  out.P = 0.5 * (out.P + out.P.transpose());
  return out;
}

}  // namespace mipo
