#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mipo/records.hpp"

namespace mipo {

// Text CSV dataset. First line is a key=value metadata comment, second the
// header row; numbers are written with 17 significant digits so
// write -> read -> write round-trips byte for byte.
struct DatasetMeta {
  std::string format = "mipo-dataset-v1";
  std::uint64_t seed = 0;
  double rate = 500.0;
  int num_legs = 4;
  Vec3 gravity = Vec3(0, 0, 9.81);
  Vec3 bias_accel = Vec3::Zero();
  Vec3 bias_gyro = Vec3::Zero();
  std::vector<Vec3> bias_foot_accel;
  std::vector<Vec3> bias_foot_gyro;
  double mean_stance_speed = 0.0;
};

struct SensorDataset {
  DatasetMeta meta;
  std::vector<SensorRecord> records;
};

struct TruthDataset {
  DatasetMeta meta;
  std::vector<TruthRecord> records;
};

void write_sensor_csv(const std::string& path, const DatasetMeta& meta,
                      const std::vector<SensorRecord>& records);
void write_truth_csv(const std::string& path, const DatasetMeta& meta,
                     const std::vector<TruthRecord>& records);

// throw std::runtime_error with the offending line number on malformed input
SensorDataset read_sensor_csv(const std::string& path);
TruthDataset read_truth_csv(const std::string& path);

// estimated trajectory rows emitted by replay
struct TrajectoryRow {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec4 q = Vec4(1, 0, 0, 0);  // scalar-first
};

void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectoryRow>& rows);
std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path);

// per-step gate diagnostics
struct DiagnosticsRow {
  double t = 0.0;
  std::vector<double> mahalanobis;
  std::vector<int> gate;
  int saturation = 0;
};

void write_diagnostics_csv(const std::string& path,
                           const std::vector<DiagnosticsRow>& rows);

std::string format_double(double v);

}  // namespace mipo
