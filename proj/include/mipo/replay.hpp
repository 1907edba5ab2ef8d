#pragma once

#include <string>
#include <vector>

#include "mipo/analysis.hpp"
#include "mipo/dataset_io.hpp"
#include "mipo/mipo.hpp"
#include "mipo/run_config.hpp"
#include "mipo/sipo.hpp"
#include "mipo/window.hpp"

namespace mipo {

struct ReplayOptions {
  std::string filter = "mipo";  // "mipo" or "sipo"
  bool estimate_biases = false;

  double yaw_injection_hz = 0.0;  // truth yaw updates when > 0 (needs truth)
  double yaw_injection_var = 1e-4;

  // capture (F, H, Sigma_w) pairs for [lin_start, lin_start + lin_count)
  int lin_start = -1;
  int lin_count = 0;

  // streaming Cramer-Rao recursion; records the X-position entry
  bool crlb = false;
  double crlb_p0_pos = 0.05;  // m^2, initial position variance

  bool window = false;  // run the sliding-window fusion alongside (mipo only)
  WindowRunConfig window_cfg;
};

struct ReplayResult {
  std::vector<TrajectoryRow> trajectory;
  std::vector<DiagnosticsRow> diagnostics;  // mipo only
  TrajectoryLinearization lin;
  std::vector<double> crlb_time;
  std::vector<double> crlb_x_entry;  // P*(0,0)
  double mean_step_ms = 0.0;
  long steps = 0;

  std::vector<TrajectoryRow> window_trajectory;  // optimized keyframes
  std::vector<SolveStats> window_stats;
  std::vector<YawFeedback> yaw_events;
};

MipoConfig make_mipo_config(const RunConfig& cfg);
SipoConfig make_sipo_config(const RunConfig& cfg, bool estimate_biases);

// Runs one filter over the dataset. truth (optional) provides the initial
// state, yaw injection values, and window anchor poses.
ReplayResult replay(const RunConfig& cfg, const SensorDataset& data,
                    const TruthDataset* truth, const ReplayOptions& opt);

}  // namespace mipo
