#pragma once

#include <cstdint>
#include <string>

#include "mipo/sensor_sim.hpp"

namespace mipo {

struct FilterRunConfig {
  std::string type = "mipo";  // "mipo" or "sipo"
  bool estimate_biases = false;
  double yaw_injection_hz = 0.0;  // > 0 injects truth yaw at this rate
  double yaw_injection_var = 1e-4;
};

struct WindowRunConfig {
  bool enabled = false;
  int size = 10;
  double keyframe_hz = 15.0;
  double anchor_hz = 0.2;
  double anchor_pos_sigma = 0.05;
  double anchor_ori_sigma = 0.02;
  bool yaw_feedback = false;
  std::uint64_t anchor_seed = 42;
};

// Top-level run configuration shared by every CLI subcommand. JSON schema;
// unknown keys are rejected with the offending field path.
struct RunConfig {
  std::uint64_t seed = 0;
  std::vector<LegModel> legs = default_leg_models();
  NoiseConfig noise;
  SimConfig sim;
  FilterRunConfig filter;
  WindowRunConfig window;
};

RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json_text(const std::string& text);
std::string default_run_config_json();

}  // namespace mipo
