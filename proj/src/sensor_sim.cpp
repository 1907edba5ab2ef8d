#include "mipo/sensor_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mipo {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

std::runtime_error sim_error(const std::string& what) {
  return std::runtime_error("sim config: " + what);
}

}  // namespace

GaitType gait_from_string(const std::string& s) {
  if (s == "trot") return GaitType::kTrot;
  if (s == "standing_trot") return GaitType::kStandingTrot;
  if (s == "flying_trot") return GaitType::kFlyingTrot;
  throw sim_error("unknown gait '" + s + "'");
}

std::string gait_to_string(GaitType g) {
  switch (g) {
    case GaitType::kTrot: return "trot";
    case GaitType::kStandingTrot: return "standing_trot";
    case GaitType::kFlyingTrot: return "flying_trot";
  }
  return "trot";
}

std::array<double, 2> GaitSchedule::window(int leg, int num_legs) const {
  if (!contact_windows.empty()) {
    if (leg >= static_cast<int>(contact_windows.size())) {
      throw sim_error("contact_windows must cover every leg");
    }
    return contact_windows[leg];
  }
  // diagonal pairs for quadrupeds, even/odd split otherwise
  const bool pair_a = (num_legs == 4) ? (leg == 0 || leg == 3) : (leg % 2 == 0);
  const double begin = pair_a ? 0.0 : 0.5;
  const double frac = stance_adjust / gait_time;
  double end = begin + 0.5;
  if (gait == GaitType::kStandingTrot) end += frac;
  if (gait == GaitType::kFlyingTrot) end -= frac;
  return {begin, end};
}

bool GaitSchedule::in_contact(int leg, int num_legs, double t) const {
  const auto w = window(leg, num_legs);
  double phase = std::fmod(t / gait_time, 1.0);
  if (phase < 0) phase += 1.0;
  if (w[1] <= 1.0) return phase >= w[0] && phase < w[1];
  return phase >= w[0] || phase < w[1] - 1.0;
}

std::vector<LegModel> default_leg_models() {
  std::vector<LegModel> legs(4);
  const Vec3 links(0.08, 0.213, 0.213);
  const double x = 0.1881, y = 0.04675;
  const Vec3 offsets[4] = {Vec3(x, y, 0), Vec3(x, -y, 0), Vec3(-x, y, 0),
                           Vec3(-x, -y, 0)};
  for (int j = 0; j < 4; ++j) {
    legs[j].hip_offset = offsets[j];
    legs[j].link_lengths = links;
    legs[j].axis_signs = Vec3::Ones();
    legs[j].d0 = 0.02;
  }
  return legs;
}

BodyTrajectory::BodyTrajectory(const SimConfig& cfg)
    : speed_(cfg.target_speed),
      yaw_rate_(cfg.yaw_rate),
      ramp_(cfg.ramp_time),
      height_(cfg.body_height),
      z_amp_(cfg.z_bob_amp),
      z_w_(kTwoPi * cfg.z_bob_hz),
      pitch_amp_(cfg.pitch_amp),
      pitch_w_(kTwoPi * cfg.pitch_hz),
      roll_amp_(cfg.roll_amp),
      roll_w_(kTwoPi * cfg.roll_hz),
      yaw_amp_(cfg.yaw_wobble_amp),
      yaw_w_(kTwoPi * cfg.yaw_wobble_hz) {}

double BodyTrajectory::warped(double t) const {
  if (ramp_ <= 0.0 || t >= ramp_) {
    return (ramp_ <= 0.0) ? t : 0.5 * ramp_ + (t - ramp_);
  }
  const double u = std::max(t, 0.0) / ramp_;
  return ramp_ * (u * u * u - 0.5 * u * u * u * u);
}

double BodyTrajectory::warp_rate(double t) const {
  if (ramp_ <= 0.0 || t >= ramp_) return 1.0;
  const double u = std::max(t, 0.0) / ramp_;
  return 3.0 * u * u - 2.0 * u * u * u;
}

double BodyTrajectory::warp_accel(double t) const {
  if (ramp_ <= 0.0 || t >= ramp_) return 0.0;
  const double u = std::max(t, 0.0) / ramp_;
  return (6.0 * u - 6.0 * u * u) / ramp_;
}

double BodyTrajectory::heading(double t) const {
  const double m = warped(t);
  return yaw_rate_ * m + yaw_amp_ * std::sin(yaw_w_ * m);
}

void BodyTrajectory::eval(double t, Vec3* p, Vec3* v, Vec3* a,
                          UnitQuaternion* q, Vec3* omega_body) const {
  const double m = warped(t);
  const double md = warp_rate(t);
  const double mdd = warp_accel(t);
  const double V = speed_, r = yaw_rate_;

  Eigen::Vector2d b, bp, bpp;
  if (std::abs(r) > 1e-12) {
    b << (V / r) * std::sin(r * m), (V / r) * (1.0 - std::cos(r * m));
    bp << V * std::cos(r * m), V * std::sin(r * m);
    bpp << -V * r * std::sin(r * m), V * r * std::cos(r * m);
  } else {
    b << V * m, 0.0;
    bp << V, 0.0;
    bpp.setZero();
  }

  const double z = height_ + z_amp_ * std::sin(z_w_ * m);
  const double zp = z_amp_ * z_w_ * std::cos(z_w_ * m);
  const double zpp = -z_amp_ * z_w_ * z_w_ * std::sin(z_w_ * m);

  if (p) *p = Vec3(b(0), b(1), z);
  if (v) *v = Vec3(bp(0) * md, bp(1) * md, zp * md);
  if (a) {
    *a = Vec3(bpp(0) * md * md + bp(0) * mdd, bpp(1) * md * md + bp(1) * mdd,
              zpp * md * md + zp * mdd);
  }

  const double psi = r * m + yaw_amp_ * std::sin(yaw_w_ * m);
  const double psi_d = (r + yaw_amp_ * yaw_w_ * std::cos(yaw_w_ * m)) * md;
  const double th = pitch_amp_ * std::sin(pitch_w_ * m);
  const double th_d = pitch_amp_ * pitch_w_ * std::cos(pitch_w_ * m) * md;
  const double ph = roll_amp_ * std::sin(roll_w_ * m);
  const double ph_d = roll_amp_ * roll_w_ * std::cos(roll_w_ * m) * md;

  if (q) {
    *q = quat_exp_exact(psi * Vec3::UnitZ()) *
         quat_exp_exact(th * Vec3::UnitY()) *
         quat_exp_exact(ph * Vec3::UnitX());
  }
  if (omega_body) {
    // body rates of the z-y-x Euler parameterization
    const double sth = std::sin(th), cth = std::cos(th);
    const double sph = std::sin(ph), cph = std::cos(ph);
    *omega_body = Vec3(ph_d - psi_d * sth, th_d * cph + psi_d * cth * sph,
                       -th_d * sph + psi_d * cth * cph);
  }
}

namespace {

struct Interval {
  double begin;
  double end;
  double mid;  // midpoint of the unclipped stance, used for foot placement
};

// stance intervals of one leg over [0, horizon], merged when adjacent
std::vector<Interval> stance_intervals(const GaitSchedule& sched, int leg,
                                       int num_legs, double horizon) {
  const auto w = sched.window(leg, num_legs);
  const double T = sched.gait_time;
  std::vector<Interval> out;
  for (int c = -2; (c + w[0]) * T < horizon; ++c) {
    const double b = (c + w[0]) * T;
    const double e = (c + w[1]) * T;
    if (e <= 0.0) continue;
    Interval iv{std::max(b, 0.0), std::min(e, horizon), 0.5 * (b + e)};
    if (!out.empty() && iv.begin <= out.back().end + 1e-9) {
      out.back().end = iv.end;
      out.back().mid = 0.5 * (out.back().begin + iv.end);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

struct LegSeries {
  std::vector<Vec3> s, ds, dds;
  std::vector<char> contact;
};

class LegGenerator {
 public:
  LegGenerator(const SimConfig& cfg, const BodyTrajectory& traj,
               const LegModel& model, int leg, int num_legs)
      : cfg_(cfg),
        traj_(traj),
        model_(model),
        leg_(leg),
        num_legs_(num_legs),
        rolling_(cfg.foot_roll_amplitude > 0.0) {}

  LegSeries run(int n_samples, double dt, double* speed_acc, long* speed_cnt);

 private:
  Vec3 neutral_point(double t) const {
    Vec3 p;
    traj_.eval(std::max(t, 0.0), &p, nullptr, nullptr, nullptr, nullptr);
    const double psi = traj_.heading(std::max(t, 0.0));
    const Vec3 lateral = model_.hip_offset +
                         Vec3(0.0, model_.side() * model_.link_lengths(0), 0.0);
    const Mat3 rz = rot_of(quat_exp_exact(psi * Vec3::UnitZ()));
    const Vec3 ground = p + rz * lateral;
    return Vec3(ground(0), ground(1), model_.d0);
  }

  // pivot-consistent foot velocity field during rolling stance
  Vec3 field(double t, const Vec3& s) const {
    if (!rolling_) return Vec3::Zero();
    Vec3 p, v, a, w;
    UnitQuaternion q;
    traj_.eval(t, &p, &v, &a, &q, &w);
    const Mat3 r = rot_of(q);
    const Vec3 rel = r.transpose() * (s - p);
    Vec3 alpha;
    if (!ik_angles(model_, rel, &alpha)) {
      std::ostringstream os;
      os << "leg " << leg_ << " out of workspace at t=" << t << " s";
      throw std::runtime_error(os.str());
    }
    const Mat3 j = fk_jacobian(model_, alpha);
    const Mat3 ax = fk_axes(model_, alpha);
    const Vec3 n = s - p;  // = R g(alpha)
    const double nn = n.norm();
    if (nn < 1e-6) {
      std::ostringstream os;
      os << "leg " << leg_ << " degenerate pivot geometry at t=" << t << " s";
      throw std::runtime_error(os.str());
    }
    const Vec3 dp = -model_.d0 * n / nn;
    const auto jlu = j.partialPivLu();
    const Vec3 c0 = jlu.solve(-skew(w) * rel - r.transpose() * v);
    const Mat3 c1 = jlu.solve(r.transpose());
    const Vec3 big_a = r * (w + ax * c0);
    const Mat3 big_b = r * ax * c1;
    const Mat3 m = Mat3::Identity() + skew(dp) * big_b;
    return m.partialPivLu().solve(big_a.cross(dp));
  }

  Vec3 rk4(double t0, double t1, Vec3 s) const {
    if (!rolling_) return s;
    const double span = t1 - t0;
    const int steps = std::max(1, static_cast<int>(std::ceil(span / 2e-3)));
    const double h = span / steps;
    double t = t0;
    for (int i = 0; i < steps; ++i) {
      const Vec3 k1 = field(t, s);
      const Vec3 k2 = field(t + 0.5 * h, s + 0.5 * h * k1);
      const Vec3 k3 = field(t + 0.5 * h, s + 0.5 * h * k2);
      const Vec3 k4 = field(t + h, s + h * k3);
      s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
    }
    return s;
  }

  Vec3 field_accel(double t, const Vec3& s) const {
    if (!rolling_) return Vec3::Zero();
    const double h = 1e-5;
    const Vec3 sp = rk4(t, t + h, s);
    const Vec3 sm = rk4(t, t - h, s);  // negative step
    return (field(t + h, sp) - field(t - h, sm)) / (2.0 * h);
  }

  const SimConfig& cfg_;
  const BodyTrajectory& traj_;
  const LegModel& model_;
  int leg_;
  int num_legs_;
  bool rolling_;
};

LegSeries LegGenerator::run(int n_samples, double dt, double* speed_acc,
                            long* speed_cnt) {
  LegSeries out;
  out.s.resize(n_samples);
  out.ds.resize(n_samples);
  out.dds.resize(n_samples);
  out.contact.assign(n_samples, 0);

  const double duration = (n_samples - 1) * dt;
  const auto stances = stance_intervals(cfg_.gait, leg_, num_legs_,
                                        duration + 2.0 * cfg_.gait.gait_time);

  // sample bookkeeping
  auto first_sample = [&](double t) {
    return static_cast<int>(std::ceil(t / dt - 1e-9));
  };

  Vec3 cursor = Vec3::Zero();
  Vec3 cursor_v = Vec3::Zero();
  bool have_cursor = false;
  double t_cursor = 0.0;

  auto fill_swing = [&](double ta, double tb, const Vec3& sa, const Vec3& va,
                        const Vec3& sb, const Vec3& vb) {
    const double span = tb - ta;
    if (span <= 1e-9) return;
    const int k0 = std::max(0, first_sample(ta));
    for (int k = k0; k < n_samples && k * dt < tb - 1e-9; ++k) {
      const double tau = (k * dt - ta) / span;
      const double t2 = tau * tau, t3 = t2 * tau;
      const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + tau;
      const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
      const double g00 = 6 * t2 - 6 * tau, g10 = 3 * t2 - 4 * tau + 1;
      const double g01 = -6 * t2 + 6 * tau, g11 = 3 * t2 - 2 * tau;
      const double w00 = 12 * tau - 6, w10 = 6 * tau - 4;
      const double w01 = -12 * tau + 6, w11 = 6 * tau - 2;
      Vec3 s = h00 * sa + h10 * span * va + h01 * sb + h11 * span * vb;
      Vec3 v = (g00 * sa + g10 * span * va + g01 * sb + g11 * span * vb) / span;
      Vec3 a = (w00 * sa + w10 * span * va + w01 * sb + w11 * span * vb) /
               (span * span);
      const double lift = cfg_.stride_lift;
      const double sn = std::sin(M_PI * tau);
      s(2) += lift * sn * sn;
      v(2) += lift * M_PI * std::sin(2.0 * M_PI * tau) / span;
      a(2) += lift * 2.0 * M_PI * M_PI * std::cos(2.0 * M_PI * tau) /
              (span * span);
      out.s[k] = s;
      out.ds[k] = v;
      out.dds[k] = a;
      out.contact[k] = 0;
    }
  };

  for (std::size_t i = 0; i < stances.size(); ++i) {
    const Interval& st = stances[i];
    if (st.begin > duration + 1e-9) break;

    // swing leading into this stance
    const Vec3 target = neutral_point(st.mid);
    const Vec3 target_v = rolling_ ? field(st.begin, target) : Vec3::Zero();
    if (st.begin > 1e-9) {
      const Vec3 sa = have_cursor ? cursor : neutral_point(t_cursor);
      const Vec3 va = have_cursor ? cursor_v : Vec3::Zero();
      fill_swing(t_cursor, st.begin, sa, va, target, target_v);
    }

    // stance: integrate the rolling ODE sample to sample
    Vec3 s = (st.begin <= 1e-9 && !have_cursor) ? neutral_point(st.mid)
                                                : target;
    if (st.begin <= 1e-9 && have_cursor) s = cursor;
    double t = std::max(st.begin, 0.0);
    const double t_end = std::min(st.end, duration + 0.5 * dt);
    for (int k = std::max(0, first_sample(t)); k < n_samples; ++k) {
      const double tk = k * dt;
      if (tk >= st.end - 1e-9) break;
      s = rk4(t, tk, s);
      t = tk;
      out.s[k] = s;
      out.ds[k] = field(tk, s);
      out.dds[k] = field_accel(tk, s);
      out.contact[k] = 1;
      if (speed_acc) {
        *speed_acc += out.ds[k].norm();
        ++(*speed_cnt);
      }
    }
    s = rk4(t, std::min(st.end, t_end), s);
    cursor = s;
    cursor_v = rolling_ ? field(std::min(st.end, t_end), s) : Vec3::Zero();
    t_cursor = st.end;
    have_cursor = true;
    if (st.end >= duration + 1e-9) break;
  }

  return out;
}

}  // namespace

SimResult generate(const SimConfig& cfg_in) {
  SimConfig cfg = cfg_in;
  if (cfg.duration <= 0) throw sim_error("duration must be > 0");
  if (cfg.rate <= 0) throw sim_error("rate must be > 0");
  if (cfg.gait.gait_time <= 0) throw sim_error("gait_time must be > 0");
  if (cfg.ramp_time < 0) throw sim_error("ramp_time must be >= 0");
  if (!cfg.noise.valid()) throw sim_error("noise config invalid");
  if (cfg.legs.empty()) cfg.legs = default_leg_models();
  const int num_legs = static_cast<int>(cfg.legs.size());
  for (int j = 0; j < num_legs; ++j) {
    if (!cfg.legs[j].valid()) {
      throw sim_error("leg model " + std::to_string(j) + " invalid");
    }
  }
  cfg.bias_foot_accel.resize(num_legs, Vec3::Zero());
  cfg.bias_foot_gyro.resize(num_legs, Vec3::Zero());
  if (!cfg.gait.contact_windows.empty() &&
      static_cast<int>(cfg.gait.contact_windows.size()) != num_legs) {
    throw sim_error("contact_windows size must equal the number of legs");
  }

  const double dt = 1.0 / cfg.rate;
  const int n_samples = static_cast<int>(std::llround(cfg.duration * cfg.rate)) + 1;
  const BodyTrajectory traj(cfg);

  double speed_acc = 0.0;
  long speed_cnt = 0;
  std::vector<LegSeries> feet;
  feet.reserve(num_legs);
  for (int j = 0; j < num_legs; ++j) {
    LegGenerator gen(cfg, traj, cfg.legs[j], j, num_legs);
    feet.push_back(gen.run(n_samples, dt, &speed_acc, &speed_cnt));
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto noise3 = [&](double sigma) {
    if (!cfg.noise_enabled || sigma <= 0.0) return Vec3::Zero().eval();
    return Vec3(sigma * gauss(rng), sigma * gauss(rng), sigma * gauss(rng));
  };

  const double sqrt_rate = std::sqrt(cfg.rate);
  const double sig_acc = cfg.noise.accel_density * sqrt_rate;
  const double sig_gyr = cfg.noise.gyro_density * sqrt_rate;
  const double sig_ja = cfg.noise.joint_angle_sigma;
  const double sig_jr = cfg.noise.joint_rate_sigma;
  const double sqrt_dt = std::sqrt(dt);

  Vec3 ba = cfg.bias_accel, bg = cfg.bias_gyro;
  std::vector<Vec3> bs = cfg.bias_foot_accel, bt = cfg.bias_foot_gyro;

  SimResult result;
  result.truth.resize(n_samples);
  result.sensors.resize(n_samples);
  result.mean_stance_speed = speed_cnt > 0 ? speed_acc / speed_cnt : 0.0;

  for (int k = 0; k < n_samples; ++k) {
    const double t = k * dt;
    Vec3 p, v, a, w;
    UnitQuaternion q;
    traj.eval(t, &p, &v, &a, &q, &w);
    const Mat3 r = rot_of(q);

    TruthRecord& tr = result.truth[k];
    SensorRecord& sr = result.sensors[k];
    tr.t = t;
    tr.p = p;
    tr.v = v;
    tr.q = q;
    tr.legs.resize(num_legs);
    sr.t = t;
    sr.legs.resize(num_legs);

    sr.accel_body = r.transpose() * (a + cfg.noise.gravity) + ba + noise3(sig_acc);
    sr.gyro_body = w + bg + noise3(sig_gyr);

    for (int j = 0; j < num_legs; ++j) {
      const LegModel& model = cfg.legs[j];
      const Vec3 s = feet[j].s[k];
      const Vec3 ds = feet[j].ds[k];
      const Vec3 dds = feet[j].dds[k];
      const Vec3 rel = r.transpose() * (s - p);

      Vec3 alpha;
      if (!ik_angles(model, rel, &alpha)) {
        std::ostringstream os;
        os << "leg " << j << " out of workspace at t=" << t << " s";
        throw std::runtime_error(os.str());
      }
      const Mat3 jac = fk_jacobian(model, alpha);
      const Vec3 alpha_dot = jac.partialPivLu().solve(
          -skew(w) * rel + r.transpose() * (ds - v));
      const UnitQuaternion q_alpha = fk_orientation(model, alpha);
      const UnitQuaternion qf = q * q_alpha;
      const Mat3 r_alpha = rot_of(q_alpha);
      const Vec3 omega_foot =
          r_alpha.transpose() * (w + fk_axes(model, alpha) * alpha_dot);

      tr.legs[j].s = s;
      tr.legs[j].ds = ds;
      tr.legs[j].qf = qf;

      auto& ch = sr.legs[j];
      ch.joint_angle = alpha + noise3(sig_ja);
      ch.joint_rate = alpha_dot + noise3(sig_jr);
      ch.gyro_foot = omega_foot + bt[j] + noise3(sig_gyr);
      Vec3 af = rot_of(qf).transpose() * (dds + cfg.noise.gravity) + bs[j] +
                noise3(sig_acc);
      for (int c = 0; c < 3; ++c) {
        af(c) = std::clamp(af(c), -cfg.imu_saturation, cfg.imu_saturation);
      }
      ch.accel_foot = af;
      ch.contact = feet[j].contact[k] ? 1.0 : 0.0;
    }

    if (cfg.bias_random_walk && cfg.noise_enabled) {
      ba += noise3(cfg.noise.accel_bias_walk * sqrt_dt);
      bg += noise3(cfg.noise.gyro_bias_walk * sqrt_dt);
      for (int j = 0; j < num_legs; ++j) {
        bs[j] += noise3(cfg.noise.accel_bias_walk * sqrt_dt);
        bt[j] += noise3(cfg.noise.gyro_bias_walk * sqrt_dt);
      }
    }
  }

  return result;
}

}  // namespace mipo
