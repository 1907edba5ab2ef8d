#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mipo/dataset_io.hpp"
#include "mipo/jacobian_check.hpp"
#include "mipo/metrics.hpp"
#include "mipo/replay.hpp"
#include "mipo/sensor_sim.hpp"

namespace {

using namespace mipo;

RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_run_config(path);
}

DatasetMeta meta_from(const RunConfig& cfg, const SimResult& sim) {
  DatasetMeta m;
  m.seed = cfg.seed;
  m.rate = cfg.sim.rate;
  m.num_legs = static_cast<int>(cfg.legs.size());
  m.gravity = cfg.noise.gravity;
  m.bias_accel = cfg.sim.bias_accel;
  m.bias_gyro = cfg.sim.bias_gyro;
  m.bias_foot_accel = cfg.sim.bias_foot_accel;
  m.bias_foot_gyro = cfg.sim.bias_foot_gyro;
  m.bias_foot_accel.resize(m.num_legs, Vec3::Zero());
  m.bias_foot_gyro.resize(m.num_legs, Vec3::Zero());
  m.mean_stance_speed = sim.mean_stance_speed;
  return m;
}

std::vector<TrajectorySample> to_samples(const std::vector<TrajectoryRow>& rows) {
  std::vector<TrajectorySample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r.t, r.p});
  return out;
}

std::vector<TrajectorySample> truth_samples(const TruthDataset& truth) {
  std::vector<TrajectorySample> out;
  out.reserve(truth.records.size());
  for (const auto& r : truth.records) out.push_back({r.t, r.p});
  return out;
}

int cmd_simulate(const std::string& config_path, const std::string& out_sensor,
                 const std::string& out_truth) {
  const RunConfig cfg = load_config_or_default(config_path);
  const SimResult sim = generate(cfg.sim);
  const DatasetMeta meta = meta_from(cfg, sim);
  write_sensor_csv(out_sensor, meta, sim.sensors);
  if (!out_truth.empty()) write_truth_csv(out_truth, meta, sim.truth);
  std::printf("simulate: %zu records, mean stance speed %.4f m/s\n",
              sim.sensors.size(), sim.mean_stance_speed);
  return 0;
}

int cmd_replay(const std::string& config_path, const std::string& dataset_path,
               const std::string& truth_path, const std::string& filter,
               const std::string& out_traj, const std::string& out_diag,
               const std::string& out_window, bool window_enabled) {
  RunConfig cfg = load_config_or_default(config_path);
  const SensorDataset data = read_sensor_csv(dataset_path);
  TruthDataset truth;
  const bool have_truth = !truth_path.empty();
  if (have_truth) truth = read_truth_csv(truth_path);

  ReplayOptions opt;
  opt.filter = filter.empty() ? cfg.filter.type : filter;
  opt.estimate_biases = cfg.filter.estimate_biases;
  opt.yaw_injection_hz = cfg.filter.yaw_injection_hz;
  opt.yaw_injection_var = cfg.filter.yaw_injection_var;
  opt.window = window_enabled || cfg.window.enabled;
  opt.window_cfg = cfg.window;

  const ReplayResult res =
      replay(cfg, data, have_truth ? &truth : nullptr, opt);
  write_trajectory_csv(out_traj, res.trajectory);
  if (!out_diag.empty() && !res.diagnostics.empty()) {
    write_diagnostics_csv(out_diag, res.diagnostics);
  }
  if (!out_window.empty() && !res.window_trajectory.empty()) {
    write_trajectory_csv(out_window, res.window_trajectory);
  }
  std::printf("replay: %ld steps, mean step time %.4f ms\n", res.steps,
              res.mean_step_ms);
  if (have_truth) {
    const auto pair = associate(to_samples(res.trajectory), truth_samples(truth));
    const DriftStats stats = aggregate(pair);
    std::printf(
        "replay: avr_drift %.4f%% med_drift %.4f%% final_drift %.4f%% "
        "max_rse %.4f m\n",
        stats.avr_drift, stats.med_drift, stats.final_drift, stats.max_rse);
  }
  return 0;
}

int cmd_jacobian_check(const std::string& config_path, int states, double tol,
                       unsigned seed) {
  const RunConfig cfg = load_config_or_default(config_path);
  const JacobianCheckReport rep =
      run_jacobian_check(make_mipo_config(cfg), states, seed);
  std::printf(
      "jacobian-check: %d states, max F err %.3e, max H err %.3e, "
      "appendix blocks %.3e, tol %.1e -> %s\n",
      rep.states, rep.max_f_err, rep.max_h_err, rep.max_appendix_err, tol,
      rep.pass(tol) ? "PASS" : "FAIL");
  return rep.pass(tol) ? 0 : 1;
}

int cmd_observability(const std::string& config_path,
                      const std::string& dataset_path,
                      const std::string& truth_path, const std::string& filter,
                      int start, int count, const std::string& out_csv) {
  RunConfig cfg = load_config_or_default(config_path);
  const SensorDataset data = read_sensor_csv(dataset_path);
  TruthDataset truth;
  const bool have_truth = !truth_path.empty();
  if (have_truth) truth = read_truth_csv(truth_path);

  ReplayOptions opt;
  opt.filter = filter;
  opt.lin_start = start;
  opt.lin_count = count;
  const ReplayResult res =
      replay(cfg, data, have_truth ? &truth : nullptr, opt);
  if (res.lin.H.empty()) throw std::runtime_error("no linearization captured");

  const MatrixXd o1 = observability_matrix(res.lin);
  const MatrixXd o2 = observability_gramian(res.lin);
  const RankReport r1 = rank_report(o1);
  const RankReport r2 = rank_report(o2);
  const int dim = static_cast<int>(o1.cols());
  std::printf("observability: dim %d rank(O1) %d gap %.3e rank(O2) %d gap %.3e\n",
              dim, r1.rank, r1.gap, r2.rank, r2.gap);

  if (!out_csv.empty()) {
    std::ofstream f(out_csv);
    f << "index,sv_o1,sv_o2\n";
    const int n = static_cast<int>(r1.singular_values.size());
    for (int i = 0; i < n; ++i) {
      f << i << "," << format_double(r1.singular_values(i)) << ","
        << format_double(i < r2.singular_values.size() ? r2.singular_values(i)
                                                       : 0.0)
        << "\n";
    }
  }
  return 0;
}

int cmd_crlb(const std::string& config_path, const std::string& dataset_path,
             const std::string& truth_path, const std::string& filter,
             double p0_pos, const std::string& out_csv) {
  RunConfig cfg = load_config_or_default(config_path);
  const SensorDataset data = read_sensor_csv(dataset_path);
  TruthDataset truth;
  const bool have_truth = !truth_path.empty();
  if (have_truth) truth = read_truth_csv(truth_path);

  ReplayOptions opt;
  opt.filter = filter;
  opt.crlb = true;
  opt.crlb_p0_pos = p0_pos;
  const ReplayResult res =
      replay(cfg, data, have_truth ? &truth : nullptr, opt);

  std::ofstream f(out_csv);
  if (!f) throw std::runtime_error("cannot open " + out_csv);
  f << "t,crlb_x\n";
  for (std::size_t i = 0; i < res.crlb_time.size(); ++i) {
    f << format_double(res.crlb_time[i]) << ","
      << format_double(res.crlb_x_entry[i]) << "\n";
  }
  std::printf("crlb: final x entry %.6e\n", res.crlb_x_entry.back());
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& dataset_path,
                const std::string& truth_path, const std::string& filters,
                const std::string& out_csv) {
  RunConfig cfg = load_config_or_default(config_path);
  const SensorDataset data = read_sensor_csv(dataset_path);
  const TruthDataset truth = read_truth_csv(truth_path);
  const auto tsamples = truth_samples(truth);

  std::vector<std::string> names;
  std::string cur;
  for (char c : filters + ",") {
    if (c == ',') {
      if (!cur.empty()) names.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }

  std::string table = "filter,avr_drift,med_drift,final_drift,max_rse,mean_step_ms\n";
  for (const auto& name : names) {
    ReplayOptions opt;
    opt.filter = name;
    opt.yaw_injection_hz = cfg.filter.yaw_injection_hz;
    opt.yaw_injection_var = cfg.filter.yaw_injection_var;
    const ReplayResult res = replay(cfg, data, &truth, opt);
    const auto pair = associate(to_samples(res.trajectory), tsamples);
    const DriftStats st = aggregate(pair);
    table += name + "," + format_double(st.avr_drift) + "," +
             format_double(st.med_drift) + "," + format_double(st.final_drift) +
             "," + format_double(st.max_rse) + "," +
             format_double(res.mean_step_ms) + "\n";
  }
  std::fputs(table.c_str(), stdout);
  if (!out_csv.empty()) {
    std::ofstream f(out_csv);
    f << table;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-IMU proprioceptive odometry toolkit"};
  app.require_subcommand(1);

  std::string config_path, dataset_path, truth_path, filter;
  std::string out_sensor = "sensors.csv", out_truth, out_traj = "trajectory.csv";
  std::string out_diag, out_window, out_csv;
  bool window_enabled = false;
  int states = 100, lin_start = 500, lin_count = 25;
  double tol = 1e-5, p0_pos = 0.05;
  unsigned seed = 1;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim->add_option("--config", config_path, "run config JSON");
  sim->add_option("--out-sensor", out_sensor, "sensor CSV path");
  sim->add_option("--out-truth", out_truth, "ground-truth CSV path");

  auto* rep = app.add_subcommand("replay", "run a filter over a dataset");
  rep->add_option("--config", config_path);
  rep->add_option("--dataset", dataset_path)->required();
  rep->add_option("--truth", truth_path);
  rep->add_option("--filter", filter, "mipo or sipo");
  rep->add_option("--out-traj", out_traj);
  rep->add_option("--out-diag", out_diag);
  rep->add_option("--out-window", out_window);
  rep->add_flag("--window", window_enabled, "enable sliding-window fusion");

  auto* jac = app.add_subcommand("jacobian-check",
                                 "compare analytical Jacobians to finite differences");
  jac->add_option("--config", config_path);
  jac->add_option("--states", states);
  jac->add_option("--tol", tol);
  jac->add_option("--seed", seed);

  auto* obs = app.add_subcommand("observability", "rank analysis of O1/O2");
  obs->add_option("--config", config_path);
  obs->add_option("--dataset", dataset_path)->required();
  obs->add_option("--truth", truth_path);
  obs->add_option("--filter", filter)->required();
  obs->add_option("--start", lin_start, "first captured step");
  obs->add_option("--count", lin_count, "captured steps");
  obs->add_option("--out", out_csv, "singular value CSV");

  auto* crlb = app.add_subcommand("crlb", "Cramer-Rao bound trace");
  crlb->add_option("--config", config_path);
  crlb->add_option("--dataset", dataset_path)->required();
  crlb->add_option("--truth", truth_path);
  crlb->add_option("--filter", filter)->required();
  crlb->add_option("--p0-pos", p0_pos, "initial position variance");
  crlb->add_option("--out", out_csv)->required();

  auto* cmp = app.add_subcommand("compare", "drift metrics for several filters");
  cmp->add_option("--config", config_path);
  cmp->add_option("--dataset", dataset_path)->required();
  cmp->add_option("--truth", truth_path)->required();
  cmp->add_option("--filters", filter, "comma-separated list")->required();
  cmp->add_option("--out", out_csv);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config_path, out_sensor, out_truth);
    if (rep->parsed()) {
      return cmd_replay(config_path, dataset_path, truth_path, filter,
                        out_traj, out_diag, out_window, window_enabled);
    }
    if (jac->parsed()) return cmd_jacobian_check(config_path, states, tol, seed);
    if (obs->parsed()) {
      return cmd_observability(config_path, dataset_path, truth_path, filter,
                               lin_start, lin_count, out_csv);
    }
    if (crlb->parsed()) {
      return cmd_crlb(config_path, dataset_path, truth_path, filter, p0_pos,
                      out_csv);
    }
    if (cmp->parsed()) {
      return cmd_compare(config_path, dataset_path, truth_path, filter, out_csv);
    }
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 1;
}
