#include "mipo/replay.hpp"

#include <chrono>
#include <random>
#include <stdexcept>

namespace mipo {

MipoConfig make_mipo_config(const RunConfig& cfg) {
  MipoConfig m;
  m.noise = cfg.noise;
  m.legs = cfg.legs;
  m.saturation_limit = cfg.sim.imu_saturation;
  return m;
}

SipoConfig make_sipo_config(const RunConfig& cfg, bool estimate_biases) {
  SipoConfig s;
  s.noise = cfg.noise;
  s.legs = cfg.legs;
  s.estimate_biases = estimate_biases;
  return s;
}

namespace {

// sliding-window runner fed from the MIPO stream
class WindowRunner {
 public:
  WindowRunner(const WindowRunConfig& cfg, const NoiseConfig& noise)
      : cfg_(cfg), noise_(noise), rng_(cfg.anchor_seed) {}

  void feed(const SensorRecord& z, double dt, const MipoState& state,
            const TruthRecord* truth, ReplayResult* out, MipoState* feedback,
            const MipoConfig& mipo_cfg) {
    const double stamp = state.t;  // `state` may alias `feedback`
    imu_buffer_.push_back({dt, z.accel_body, z.gyro_body});
    pre_.add(state.v, state.P.block<3, 3>(kVel, kVel), dt);

    if (!started_) {
      start_keyframe(state);
      started_ = true;
      return;
    }
    if (stamp - last_kf_stamp_ + 1e-9 < 1.0 / cfg_.keyframe_hz) return;

    // close the interval [prev kf, new kf]
    KeyframeState kf;
    kf.stamp = state.t;
    kf.p = state.p;
    kf.v = state.v;
    kf.q = state.q;
    kf.ba = state.ba;
    kf.bg = state.bg;
    const long id = graph_.add_keyframe(kf);
    graph_.add_factor(
        make_inertial_factor(prev_id_, id, std::move(imu_buffer_), noise_));
    graph_.add_factor(make_po_displacement_factor(prev_id_, id, pre_));
    imu_buffer_.clear();
    pre_ = PoPreintegral{};
    pre_.t_begin = stamp;

    if (truth && cfg_.anchor_hz > 0.0 &&
        stamp - last_anchor_stamp_ + 1e-9 >= 1.0 / cfg_.anchor_hz) {
      std::normal_distribution<double> g(0.0, 1.0);
      const Vec3 p_noise(cfg_.anchor_pos_sigma * g(rng_),
                         cfg_.anchor_pos_sigma * g(rng_),
                         cfg_.anchor_pos_sigma * g(rng_));
      const Vec3 th_noise(cfg_.anchor_ori_sigma * g(rng_),
                          cfg_.anchor_ori_sigma * g(rng_),
                          cfg_.anchor_ori_sigma * g(rng_));
      graph_.add_factor(make_anchor_factor(
          id, truth->p + p_noise, truth->q * quat_exp_exact(th_noise),
          cfg_.anchor_pos_sigma, cfg_.anchor_ori_sigma));
      last_anchor_stamp_ = stamp;
    }

    out->window_stats.push_back(graph_.solve());
    if (cfg_.yaw_feedback && feedback) {
      const YawFeedback fb = feedback_yaw(graph_);
      out->yaw_events.push_back(fb);
      *feedback = mipo_yaw_update(mipo_cfg, *feedback, fb.yaw,
                                  std::max(fb.variance, 1e-8));
    }

    while (graph_.num_keyframes() > cfg_.size) {
      emit_keyframe(graph_.oldest_id(), out);
      graph_.marginalize_oldest();
    }
    prev_id_ = id;
    last_kf_stamp_ = stamp;
  }

  void finish(ReplayResult* out) {
    if (!started_) return;
    graph_.solve();
    while (graph_.num_keyframes() > 0) {
      emit_keyframe(graph_.oldest_id(), out);
      if (!graph_.marginalize_oldest() && graph_.num_keyframes() == 0) break;
    }
  }

 private:
  void start_keyframe(const MipoState& state) {
    KeyframeState kf;
    kf.stamp = state.t;
    kf.p = state.p;
    kf.v = state.v;
    kf.q = state.q;
    kf.ba = state.ba;
    kf.bg = state.bg;
    prev_id_ = graph_.add_keyframe(kf);
    last_kf_stamp_ = state.t;
    last_anchor_stamp_ = state.t - 1.0 / std::max(cfg_.anchor_hz, 1e-6);

    MatrixXd sqrt_info = MatrixXd::Zero(kKfDim, kKfDim);
    sqrt_info.block<3, 3>(0, 0) = 1e3 * Mat3::Identity();
    sqrt_info.block<3, 3>(3, 3) = 1e2 * Mat3::Identity();
    sqrt_info.block<3, 3>(6, 6) = 1e3 * Mat3::Identity();
    sqrt_info.block<3, 3>(9, 9) = 1e2 * Mat3::Identity();
    sqrt_info.block<3, 3>(12, 12) = 1e2 * Mat3::Identity();
    graph_.add_factor(make_prior_factor(prev_id_, kf, sqrt_info));

    imu_buffer_.clear();
    pre_ = PoPreintegral{};
    pre_.t_begin = state.t;
  }

  void emit_keyframe(long id, ReplayResult* out) {
    const KeyframeState& kf = graph_.keyframe(id);
    TrajectoryRow row;
    row.t = kf.stamp;
    row.p = kf.p;
    row.v = kf.v;
    row.q = kf.q.coeffs();
    out->window_trajectory.push_back(row);
  }

  WindowRunConfig cfg_;
  NoiseConfig noise_;
  std::mt19937_64 rng_;
  WindowGraph graph_;
  std::vector<ImuSample> imu_buffer_;
  PoPreintegral pre_;
  long prev_id_ = -1;
  double last_kf_stamp_ = 0.0;
  double last_anchor_stamp_ = -1e9;
  bool started_ = false;
};

const TruthRecord* truth_at(const TruthDataset* truth, std::size_t k) {
  if (!truth || k >= truth->records.size()) return nullptr;
  return &truth->records[k];
}

}  // namespace

ReplayResult replay(const RunConfig& cfg, const SensorDataset& data,
                    const TruthDataset* truth, const ReplayOptions& opt) {
  if (data.records.empty()) throw std::runtime_error("replay: empty dataset");
  const int e = data.meta.num_legs;
  if (static_cast<int>(cfg.legs.size()) != e) {
    throw std::runtime_error("replay: config/dataset leg count mismatch");
  }
  const bool use_mipo = opt.filter == "mipo";
  if (!use_mipo && opt.filter != "sipo") {
    throw std::runtime_error("replay: unknown filter '" + opt.filter + "'");
  }
  if ((opt.yaw_injection_hz > 0 || (opt.window && opt.window_cfg.anchor_hz > 0)) &&
      truth == nullptr) {
    throw std::runtime_error("replay: yaw injection and anchors need truth");
  }

  ReplayResult out;
  const MipoConfig mipo_cfg = make_mipo_config(cfg);
  const SipoConfig sipo_cfg = make_sipo_config(cfg, opt.estimate_biases);

  // initial state: from the first truth record when available, otherwise an
  // arbitrary anchor frame built from the first sensor record
  MipoState mx;
  SipoState sx;
  {
    const SensorRecord& z0 = data.records.front();
    Vec3 p0 = Vec3::Zero();
    Vec3 v0 = Vec3::Zero();
    UnitQuaternion q0;
    std::vector<Vec3> s0(e), ds0(e, Vec3::Zero());
    std::vector<UnitQuaternion> qf0(e);
    if (truth && !truth->records.empty()) {
      const TruthRecord& t0 = truth->records.front();
      p0 = t0.p;
      v0 = t0.v;
      q0 = t0.q;
      for (int j = 0; j < e; ++j) {
        s0[j] = t0.legs[j].s;
        ds0[j] = t0.legs[j].ds;
        qf0[j] = t0.legs[j].qf;
      }
    } else {
      for (int j = 0; j < e; ++j) {
        s0[j] = fk_position(cfg.legs[j], z0.legs[j].joint_angle);
        qf0[j] = fk_orientation(cfg.legs[j], z0.legs[j].joint_angle);
      }
    }
    if (use_mipo) {
      mx = mipo_init(mipo_cfg, z0.t, p0, v0, q0, s0, ds0, qf0);
    } else {
      sx = sipo_init(sipo_cfg, z0.t, p0, v0, q0, s0);
    }
  }

  std::optional<WindowRunner> window;
  if (opt.window) {
    if (!use_mipo) throw std::runtime_error("replay: window fusion needs mipo");
    window.emplace(opt.window_cfg, cfg.noise);
  }

  CrlbAccumulator crlb{MatrixXd::Zero(1, 1)};
  if (opt.crlb) {
    MatrixXd p0 = use_mipo ? mx.P : sx.P;
    p0.block<3, 3>(0, 0) = opt.crlb_p0_pos * Mat3::Identity();
    crlb = CrlbAccumulator(p0);
    out.crlb_time.push_back(data.records.front().t);
    out.crlb_x_entry.push_back(crlb.value()(0, 0));
  }

  const bool capture = opt.lin_start >= 0 && opt.lin_count > 0;
  double next_yaw_t = opt.yaw_injection_hz > 0
                          ? data.records.front().t + 1.0 / opt.yaw_injection_hz
                          : 1e300;

  double total_ms = 0.0;
  for (std::size_t k = 1; k < data.records.size(); ++k) {
    const SensorRecord& z = data.records[k];
    const double dt = z.t - data.records[k - 1].t;
    const bool want_lin =
        capture && static_cast<int>(k) >= opt.lin_start &&
        static_cast<int>(k) < opt.lin_start + opt.lin_count;
    const bool want_fh = want_lin || opt.crlb;

    MatrixXd f_step, h_step;
    VectorXd var_step;
    MatrixXd* f_ptr = want_fh ? &f_step : nullptr;
    MatrixXd* h_ptr = want_fh ? &h_step : nullptr;
    VectorXd* var_ptr = want_fh ? &var_step : nullptr;

    const auto t0 = std::chrono::steady_clock::now();
    if (use_mipo) {
      UpdateDiagnostics diag;
      mx = mipo_step(mipo_cfg, mx, z, dt, &diag, f_ptr, h_ptr, var_ptr);
      const auto t1 = std::chrono::steady_clock::now();
      total_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();

      DiagnosticsRow drow;
      drow.t = z.t;
      drow.mahalanobis = diag.mahalanobis;
      drow.gate.assign(diag.gate.begin(), diag.gate.end());
      drow.saturation = diag.saturation_flagged ? 1 : 0;
      out.diagnostics.push_back(std::move(drow));

      if (z.t >= next_yaw_t && truth_at(truth, k)) {
        mx = mipo_yaw_update(mipo_cfg, mx, yaw_of(truth->records[k].q),
                             opt.yaw_injection_var);
        next_yaw_t += 1.0 / opt.yaw_injection_hz;
      }
      if (window) {
        window->feed(z, dt, mx, truth_at(truth, k), &out, &mx, mipo_cfg);
      }
      TrajectoryRow row;
      row.t = mx.t;
      row.p = mx.p;
      row.v = mx.v;
      row.q = mx.q.coeffs();
      out.trajectory.push_back(row);
    } else {
      SipoStepInfo info;
      sx = sipo_step(sipo_cfg, sx, z, dt, &info, f_ptr, h_ptr, var_ptr);
      const auto t1 = std::chrono::steady_clock::now();
      total_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
      if (z.t >= next_yaw_t && truth_at(truth, k)) {
        sx = sipo_yaw_update(sipo_cfg, sx, yaw_of(truth->records[k].q),
                             opt.yaw_injection_var);
        next_yaw_t += 1.0 / opt.yaw_injection_hz;
      }
      TrajectoryRow row;
      row.t = sx.t;
      row.p = sx.p;
      row.v = sx.v;
      row.q = sx.q.coeffs();
      out.trajectory.push_back(row);
    }
    ++out.steps;

    if (want_lin) {
      out.lin.F.push_back(f_step);
      out.lin.H.push_back(h_step);
      out.lin.var.push_back(var_step);
    }
    if (opt.crlb) {
      crlb.step(f_step, h_step, var_step);
      out.crlb_time.push_back(z.t);
      out.crlb_x_entry.push_back(crlb.value()(0, 0));
    }
  }

  if (window) window->finish(&out);
  out.mean_step_ms = out.steps > 0 ? total_ms / out.steps : 0.0;
  return out;
}

}  // namespace mipo
