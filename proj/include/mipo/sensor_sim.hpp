#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mipo/leg_kinematics.hpp"
#include "mipo/noise_config.hpp"
#include "mipo/records.hpp"

namespace mipo {

enum class GaitType { kTrot, kStandingTrot, kFlyingTrot };

GaitType gait_from_string(const std::string& s);
std::string gait_to_string(GaitType g);

// Contact phase windows per leg. Trot keeps two alternating diagonal pairs;
// standing trot extends each stance by stance_adjust seconds (full-stance
// overlap at the switch); flying trot shortens each stance by the same amount
// (full-flight gap).
struct GaitSchedule {
  GaitType gait = GaitType::kTrot;
  double gait_time = 0.4;       // s, one full cycle
  double stance_adjust = 0.05;  // s, standing/flying add-on

  // phase windows [begin, end) in [0, 1), end may exceed 1 to wrap; when
  // non-empty this overrides the per-gait defaults (a [0,1] window keeps a
  // leg in permanent stance, which with zero speed is a standstill)
  std::vector<std::array<double, 2>> contact_windows;

  std::array<double, 2> window(int leg, int num_legs) const;
  bool in_contact(int leg, int num_legs, double t) const;
};

struct SimConfig {
  double duration = 20.0;
  double rate = 500.0;  // Hz
  double target_speed = 0.5;  // m/s
  double yaw_rate = 0.0;      // rad/s
  double ramp_time = 1.0;     // s, smooth speed ramp-up
  double body_height = 0.30;  // m

  // small smooth oscillations that make trajectories generic
  double z_bob_amp = 0.0;      // m
  double z_bob_hz = 2.0;
  double pitch_amp = 0.0;      // rad
  double pitch_hz = 1.3;
  double roll_amp = 0.0;       // rad
  double roll_hz = 1.7;
  double yaw_wobble_amp = 0.0; // rad
  double yaw_wobble_hz = 0.5;

  GaitSchedule gait;
  double stride_lift = 0.04;          // m, swing apex
  double foot_roll_amplitude = 0.03;  // m/s; > 0 enables rolling-contact stance
  double imu_saturation = 150.0;      // m/s^2, accelerometer clipping

  NoiseConfig noise;
  bool noise_enabled = true;

  // truth biases, constant unless bias_random_walk is set
  Vec3 bias_accel = Vec3::Zero();
  Vec3 bias_gyro = Vec3::Zero();
  std::vector<Vec3> bias_foot_accel;  // per leg, defaults to zero
  std::vector<Vec3> bias_foot_gyro;
  bool bias_random_walk = false;

  std::uint64_t seed = 0;
  std::vector<LegModel> legs;  // defaults to a Go1-like quadruped when empty

  bool standstill() const { return target_speed == 0.0 && yaw_rate == 0.0; }
};

// Go1-like quadruped geometry, legs ordered FL, FR, RL, RR
std::vector<LegModel> default_leg_models();

// Closed-form rigid-body truth trajectory with exact first and second
// derivatives: an arc (or line) traversed under a smoothstep speed ramp plus
// optional z/pitch/roll/yaw oscillations.
class BodyTrajectory {
 public:
  explicit BodyTrajectory(const SimConfig& cfg);

  void eval(double t, Vec3* p, Vec3* v, Vec3* a, UnitQuaternion* q,
            Vec3* omega_body) const;

  double heading(double t) const;

 private:
  double warped(double t) const;        // ramped time
  double warp_rate(double t) const;     // d(warped)/dt
  double warp_accel(double t) const;

  double speed_ = 0.0;
  double yaw_rate_ = 0.0;
  double ramp_ = 1.0;
  double height_ = 0.3;
  double z_amp_ = 0.0, z_w_ = 0.0;
  double pitch_amp_ = 0.0, pitch_w_ = 0.0;
  double roll_amp_ = 0.0, roll_w_ = 0.0;
  double yaw_amp_ = 0.0, yaw_w_ = 0.0;
};

struct SimResult {
  std::vector<TruthRecord> truth;
  std::vector<SensorRecord> sensors;
  double mean_stance_speed = 0.0;  // realized rolling speed, reported in meta
};

// Generates the ground-truth trajectory and the matching sensor streams.
// Every record is algebraically self-consistent: joint angles come from the
// exact leg IK, joint rates and foot angular rates from the kinematic chain,
// and during rolling stance the foot velocity satisfies the pivot relation
// s_dot = omega_p x d_p at machine precision.
// Throws std::runtime_error on invalid configs or feet leaving the workspace.
SimResult generate(const SimConfig& cfg);

}  // namespace mipo
