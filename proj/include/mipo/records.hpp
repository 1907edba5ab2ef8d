#pragma once

#include <cmath>
#include <vector>

#include "mipo/rotation.hpp"

namespace mipo {

// One synchronized sample of every sensor channel. Per-leg blocks are
// ordered FL, FR, RL, RR for quadrupeds.
struct SensorRecord {
  struct LegChannels {
    Vec3 accel_foot = Vec3::Zero();   // m/s^2, foot-center frame
    Vec3 gyro_foot = Vec3::Zero();    // rad/s, foot-center frame
    Vec3 joint_angle = Vec3::Zero();  // rad
    Vec3 joint_rate = Vec3::Zero();   // rad/s
    double contact = 0.0;             // binary flag
  };

  double t = 0.0;
  Vec3 accel_body = Vec3::Zero();
  Vec3 gyro_body = Vec3::Zero();
  std::vector<LegChannels> legs;

  bool finite() const {
    bool ok = std::isfinite(t) && accel_body.allFinite() && gyro_body.allFinite();
    for (const auto& ch : legs) {
      ok = ok && ch.accel_foot.allFinite() && ch.gyro_foot.allFinite() &&
           ch.joint_angle.allFinite() && ch.joint_rate.allFinite() &&
           std::isfinite(ch.contact);
    }
    return ok;
  }
};

struct TruthRecord {
  struct LegTruth {
    Vec3 s = Vec3::Zero();   // foot-center position, world
    Vec3 ds = Vec3::Zero();  // foot-center velocity, world
    UnitQuaternion qf;       // foot orientation, world
  };

  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  UnitQuaternion q;
  std::vector<LegTruth> legs;
};

}  // namespace mipo
