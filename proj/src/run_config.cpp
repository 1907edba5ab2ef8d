#include "mipo/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mipo {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("config: " + path + ": " + what);
}

void check_keys(const json& j, const std::string& path,
                const std::set<std::string>& known) {
  for (const auto& item : j.items()) {
    if (known.find(item.key()) == known.end()) {
      fail(path + "." + item.key(), "unknown key");
    }
  }
}

double get_num(const json& j, const std::string& path, const char* key,
               double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) fail(path + "." + key, "expected a number");
  return j[key].get<double>();
}

bool get_bool(const json& j, const std::string& path, const char* key,
              bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) fail(path + "." + key, "expected a boolean");
  return j[key].get<bool>();
}

std::string get_str(const json& j, const std::string& path, const char* key,
                    const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) fail(path + "." + key, "expected a string");
  return j[key].get<std::string>();
}

Vec3 get_vec3(const json& j, const std::string& path, const char* key,
              const Vec3& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j[key];
  if (!a.is_array() || a.size() != 3 || !a[0].is_number() ||
      !a[1].is_number() || !a[2].is_number()) {
    fail(path + "." + key, "expected an array of 3 numbers");
  }
  return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

NoiseConfig parse_noise(const json& j, const std::string& path) {
  NoiseConfig n;
  check_keys(j, path,
             {"accel_density", "gyro_density", "accel_bias_walk",
              "gyro_bias_walk", "joint_angle_sigma", "joint_rate_sigma",
              "fk_pos_var", "fk_ori_var", "lo_vel_var", "pivot_var",
              "grav_var", "sigma_c", "sigma_n", "mahalanobis_sigma",
              "gravity"});
  n.accel_density = get_num(j, path, "accel_density", n.accel_density);
  n.gyro_density = get_num(j, path, "gyro_density", n.gyro_density);
  n.accel_bias_walk = get_num(j, path, "accel_bias_walk", n.accel_bias_walk);
  n.gyro_bias_walk = get_num(j, path, "gyro_bias_walk", n.gyro_bias_walk);
  n.joint_angle_sigma = get_num(j, path, "joint_angle_sigma", n.joint_angle_sigma);
  n.joint_rate_sigma = get_num(j, path, "joint_rate_sigma", n.joint_rate_sigma);
  n.fk_pos_var = get_num(j, path, "fk_pos_var", n.fk_pos_var);
  n.fk_ori_var = get_num(j, path, "fk_ori_var", n.fk_ori_var);
  n.lo_vel_var = get_num(j, path, "lo_vel_var", n.lo_vel_var);
  n.pivot_var = get_num(j, path, "pivot_var", n.pivot_var);
  n.grav_var = get_num(j, path, "grav_var", n.grav_var);
  n.sigma_c = get_num(j, path, "sigma_c", n.sigma_c);
  n.sigma_n = get_num(j, path, "sigma_n", n.sigma_n);
  n.mahalanobis_sigma = get_num(j, path, "mahalanobis_sigma", n.mahalanobis_sigma);
  n.gravity = get_vec3(j, path, "gravity", n.gravity);
  if (!n.valid()) fail(path, "noise values must be positive and gravity z up");
  if (n.sigma_n / n.sigma_c < 1e3) {
    fail(path + ".sigma_n", "sigma_n must be >= 1e3 * sigma_c");
  }
  return n;
}

std::vector<LegModel> parse_legs(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array");
  std::vector<LegModel> legs;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string lp = path + "[" + std::to_string(i) + "]";
    const auto& e = j[i];
    if (!e.is_object()) fail(lp, "expected an object");
    check_keys(e, lp, {"hip_offset", "link_lengths", "axis_signs", "d0"});
    LegModel m;
    m.hip_offset = get_vec3(e, lp, "hip_offset", Vec3::Zero());
    m.link_lengths = get_vec3(e, lp, "link_lengths", Vec3::Zero());
    m.axis_signs = get_vec3(e, lp, "axis_signs", Vec3::Ones());
    m.d0 = get_num(e, lp, "d0", 0.02);
    if (!m.valid()) fail(lp, "link lengths and d0 must be positive, axis signs +-1");
    legs.push_back(m);
  }
  return legs;
}

GaitSchedule parse_gait(const json& j, const std::string& path, int num_legs) {
  GaitSchedule g;
  check_keys(j, path, {"type", "gait_time", "stance_adjust", "contact_windows"});
  g.gait = gait_from_string(get_str(j, path, "type", "trot"));
  g.gait_time = get_num(j, path, "gait_time", g.gait_time);
  g.stance_adjust = get_num(j, path, "stance_adjust", g.stance_adjust);
  if (g.gait_time <= 0) fail(path + ".gait_time", "must be > 0");
  if (j.contains("contact_windows")) {
    const auto& cw = j["contact_windows"];
    if (!cw.is_array() || static_cast<int>(cw.size()) != num_legs) {
      fail(path + ".contact_windows", "expected one [begin,end] pair per leg");
    }
    for (const auto& w : cw) {
      if (!w.is_array() || w.size() != 2) {
        fail(path + ".contact_windows", "expected [begin,end] pairs");
      }
      g.contact_windows.push_back({w[0].get<double>(), w[1].get<double>()});
    }
  }
  return g;
}

SimConfig parse_sim(const json& j, const std::string& path, int num_legs) {
  SimConfig s;
  check_keys(j, path,
             {"duration", "rate", "target_speed", "yaw_rate", "ramp_time",
              "body_height", "z_bob_amp", "z_bob_hz", "pitch_amp", "pitch_hz",
              "roll_amp", "roll_hz", "yaw_wobble_amp", "yaw_wobble_hz",
              "gait", "stride_lift", "foot_roll_amplitude", "imu_saturation",
              "noise_enabled", "bias_accel", "bias_gyro", "bias_foot_accel",
              "bias_foot_gyro", "bias_random_walk"});
  s.duration = get_num(j, path, "duration", s.duration);
  s.rate = get_num(j, path, "rate", s.rate);
  s.target_speed = get_num(j, path, "target_speed", s.target_speed);
  s.yaw_rate = get_num(j, path, "yaw_rate", s.yaw_rate);
  s.ramp_time = get_num(j, path, "ramp_time", s.ramp_time);
  s.body_height = get_num(j, path, "body_height", s.body_height);
  s.z_bob_amp = get_num(j, path, "z_bob_amp", s.z_bob_amp);
  s.z_bob_hz = get_num(j, path, "z_bob_hz", s.z_bob_hz);
  s.pitch_amp = get_num(j, path, "pitch_amp", s.pitch_amp);
  s.pitch_hz = get_num(j, path, "pitch_hz", s.pitch_hz);
  s.roll_amp = get_num(j, path, "roll_amp", s.roll_amp);
  s.roll_hz = get_num(j, path, "roll_hz", s.roll_hz);
  s.yaw_wobble_amp = get_num(j, path, "yaw_wobble_amp", s.yaw_wobble_amp);
  s.yaw_wobble_hz = get_num(j, path, "yaw_wobble_hz", s.yaw_wobble_hz);
  if (j.contains("gait")) s.gait = parse_gait(j["gait"], path + ".gait", num_legs);
  s.stride_lift = get_num(j, path, "stride_lift", s.stride_lift);
  s.foot_roll_amplitude =
      get_num(j, path, "foot_roll_amplitude", s.foot_roll_amplitude);
  s.imu_saturation = get_num(j, path, "imu_saturation", s.imu_saturation);
  s.noise_enabled = get_bool(j, path, "noise_enabled", s.noise_enabled);
  s.bias_accel = get_vec3(j, path, "bias_accel", s.bias_accel);
  s.bias_gyro = get_vec3(j, path, "bias_gyro", s.bias_gyro);
  s.bias_random_walk = get_bool(j, path, "bias_random_walk", s.bias_random_walk);
  for (const char* key : {"bias_foot_accel", "bias_foot_gyro"}) {
    if (!j.contains(key)) continue;
    const auto& arr = j[key];
    if (!arr.is_array() || static_cast<int>(arr.size()) != num_legs) {
      fail(path + "." + key, "expected one [x,y,z] entry per leg");
    }
    auto& dst = std::string(key) == "bias_foot_accel" ? s.bias_foot_accel
                                                      : s.bias_foot_gyro;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& v = arr[i];
      if (!v.is_array() || v.size() != 3) fail(path + "." + key, "bad entry");
      dst.push_back(Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>()));
    }
  }
  return s;
}

FilterRunConfig parse_filter(const json& j, const std::string& path) {
  FilterRunConfig f;
  check_keys(j, path, {"type", "estimate_biases", "yaw_injection_hz",
                       "yaw_injection_var"});
  f.type = get_str(j, path, "type", f.type);
  if (f.type != "mipo" && f.type != "sipo") {
    fail(path + ".type", "expected 'mipo' or 'sipo'");
  }
  f.estimate_biases = get_bool(j, path, "estimate_biases", f.estimate_biases);
  f.yaw_injection_hz = get_num(j, path, "yaw_injection_hz", f.yaw_injection_hz);
  f.yaw_injection_var = get_num(j, path, "yaw_injection_var", f.yaw_injection_var);
  return f;
}

WindowRunConfig parse_window(const json& j, const std::string& path) {
  WindowRunConfig w;
  check_keys(j, path,
             {"enabled", "size", "keyframe_hz", "anchor_hz",
              "anchor_pos_sigma", "anchor_ori_sigma", "yaw_feedback",
              "anchor_seed"});
  w.enabled = get_bool(j, path, "enabled", w.enabled);
  w.size = static_cast<int>(get_num(j, path, "size", w.size));
  w.keyframe_hz = get_num(j, path, "keyframe_hz", w.keyframe_hz);
  w.anchor_hz = get_num(j, path, "anchor_hz", w.anchor_hz);
  w.anchor_pos_sigma = get_num(j, path, "anchor_pos_sigma", w.anchor_pos_sigma);
  w.anchor_ori_sigma = get_num(j, path, "anchor_ori_sigma", w.anchor_ori_sigma);
  w.yaw_feedback = get_bool(j, path, "yaw_feedback", w.yaw_feedback);
  w.anchor_seed =
      static_cast<std::uint64_t>(get_num(j, path, "anchor_seed", w.anchor_seed));
  if (w.size < 2) fail(path + ".size", "window size must be >= 2");
  return w;
}

RunConfig parse(const json& j) {
  if (!j.is_object()) throw std::runtime_error("config: root must be an object");
  check_keys(j, "", {"seed", "legs", "noise", "sim", "filter", "window"});
  RunConfig c;
  c.seed = static_cast<std::uint64_t>(get_num(j, "", "seed", 0.0));
  if (j.contains("legs")) c.legs = parse_legs(j["legs"], "legs");
  if (j.contains("noise")) c.noise = parse_noise(j["noise"], "noise");
  if (j.contains("sim")) {
    c.sim = parse_sim(j["sim"], "sim", static_cast<int>(c.legs.size()));
  }
  if (j.contains("filter")) c.filter = parse_filter(j["filter"], "filter");
  if (j.contains("window")) c.window = parse_window(j["window"], "window");
  c.sim.noise = c.noise;
  c.sim.legs = c.legs;
  c.sim.seed = c.seed;
  return c;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config: " + path + ": " + e.what());
  }
  return parse(j);
}

RunConfig run_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("config: ") + e.what());
  }
  return parse(j);
}

std::string default_run_config_json() {
  RunConfig c;
  json j;
  j["seed"] = 0;
  j["noise"] = {{"accel_density", c.noise.accel_density},
                {"gyro_density", c.noise.gyro_density},
                {"gravity", {0.0, 0.0, 9.81}}};
  j["sim"] = {{"duration", c.sim.duration},
              {"rate", c.sim.rate},
              {"target_speed", c.sim.target_speed}};
  j["filter"] = {{"type", "mipo"}};
  return j.dump(2);
}

}  // namespace mipo
