#pragma once

#include <random>

#include "mipo/rotation.hpp"

namespace mipo::test {

inline UnitQuaternion random_quat(std::mt19937_64* rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return UnitQuaternion(g(*rng), Vec3(g(*rng), g(*rng), g(*rng)));
}

inline Vec3 random_vec(std::mt19937_64* rng, double sigma = 1.0) {
  std::normal_distribution<double> g(0.0, sigma);
  return Vec3(g(*rng), g(*rng), g(*rng));
}

// rotation-matrix distance between two quaternions; immune to double cover
inline double rotation_distance(const UnitQuaternion& a,
                                const UnitQuaternion& b) {
  return (rot_of(a) - rot_of(b)).cwiseAbs().maxCoeff();
}

}  // namespace mipo::test
