#include "mipo/dataset_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mipo {

namespace {

std::runtime_error io_error(const std::string& path, const std::string& what) {
  return std::runtime_error(path + ": " + what);
}

std::runtime_error line_error(const std::string& path, int line,
                              const std::string& what) {
  std::ostringstream os;
  os << path << ":" << line << ": " << what;
  return std::runtime_error(os.str());
}

void append_vec(std::string* s, const Vec3& v) {
  for (int i = 0; i < 3; ++i) {
    *s += ',';
    *s += format_double(v(i));
  }
}

void append_quat(std::string* s, const UnitQuaternion& q) {
  const Vec4 c = q.coeffs();
  for (int i = 0; i < 4; ++i) {
    *s += ',';
    *s += format_double(c(i));
  }
}

std::string meta_line(const DatasetMeta& m) {
  std::string s = "# " + m.format;
  s += " seed=" + std::to_string(m.seed);
  s += " rate=" + format_double(m.rate);
  s += " legs=" + std::to_string(m.num_legs);
  auto vec_field = [&](const std::string& key, const Vec3& v) {
    s += " " + key + "=" + format_double(v(0)) + "," + format_double(v(1)) +
         "," + format_double(v(2));
  };
  vec_field("gravity", m.gravity);
  vec_field("bias_accel", m.bias_accel);
  vec_field("bias_gyro", m.bias_gyro);
  for (std::size_t j = 0; j < m.bias_foot_accel.size(); ++j) {
    vec_field("bias_foot_accel" + std::to_string(j), m.bias_foot_accel[j]);
    vec_field("bias_foot_gyro" + std::to_string(j), m.bias_foot_gyro[j]);
  }
  s += " mean_stance_speed=" + format_double(m.mean_stance_speed);
  return s;
}

Vec3 parse_vec_field(const std::string& path, const std::string& value) {
  Vec3 v;
  if (std::sscanf(value.c_str(), "%lf,%lf,%lf", &v(0), &v(1), &v(2)) != 3) {
    throw io_error(path, "bad vector field '" + value + "'");
  }
  return v;
}

DatasetMeta parse_meta(const std::string& path, const std::string& line) {
  DatasetMeta m;
  std::istringstream is(line);
  std::string tok;
  is >> tok;  // '#'
  if (tok != "#") throw io_error(path, "missing metadata comment line");
  is >> m.format;
  if (m.format != "mipo-dataset-v1") {
    throw io_error(path, "unknown dataset format '" + m.format + "'");
  }
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw io_error(path, "bad meta token " + tok);
    const std::string key = tok.substr(0, eq);
    const std::string value = tok.substr(eq + 1);
    if (key == "seed") {
      m.seed = std::stoull(value);
    } else if (key == "rate") {
      m.rate = std::strtod(value.c_str(), nullptr);
    } else if (key == "legs") {
      m.num_legs = std::stoi(value);
      m.bias_foot_accel.resize(m.num_legs, Vec3::Zero());
      m.bias_foot_gyro.resize(m.num_legs, Vec3::Zero());
    } else if (key == "gravity") {
      m.gravity = parse_vec_field(path, value);
    } else if (key == "bias_accel") {
      m.bias_accel = parse_vec_field(path, value);
    } else if (key == "bias_gyro") {
      m.bias_gyro = parse_vec_field(path, value);
    } else if (key == "mean_stance_speed") {
      m.mean_stance_speed = std::strtod(value.c_str(), nullptr);
    } else if (key.rfind("bias_foot_accel", 0) == 0) {
      const int j = std::stoi(key.substr(std::strlen("bias_foot_accel")));
      if (j >= 0 && j < m.num_legs) {
        m.bias_foot_accel[j] = parse_vec_field(path, value);
      }
    } else if (key.rfind("bias_foot_gyro", 0) == 0) {
      const int j = std::stoi(key.substr(std::strlen("bias_foot_gyro")));
      if (j >= 0 && j < m.num_legs) {
        m.bias_foot_gyro[j] = parse_vec_field(path, value);
      }
    } else {
      throw io_error(path, "unknown meta key '" + key + "'");
    }
  }
  return m;
}

std::vector<double> split_row(const std::string& path, int line_no,
                              const std::string& line, int expect) {
  std::vector<double> out;
  out.reserve(expect);
  const char* p = line.c_str();
  char* end = nullptr;
  while (*p) {
    const double v = std::strtod(p, &end);
    if (end == p) throw line_error(path, line_no, "malformed number");
    out.push_back(v);
    p = end;
    if (*p == ',') ++p;
    else if (*p != '\0') throw line_error(path, line_no, "unexpected character");
  }
  if (static_cast<int>(out.size()) != expect) {
    std::ostringstream os;
    os << "expected " << expect << " columns, found " << out.size();
    throw line_error(path, line_no, os.str());
  }
  return out;
}

std::string sensor_header(int legs) {
  std::string h = "t,ab_x,ab_y,ab_z,wb_x,wb_y,wb_z";
  for (int j = 0; j < legs; ++j) {
    const std::string n = std::to_string(j);
    for (const char* base : {"af", "wf", "alpha", "dalpha"}) {
      for (const char* axis : {"x", "y", "z"}) {
        h += "," + std::string(base) + n + "_" + axis;
      }
    }
    h += ",c" + n;
  }
  return h;
}

std::string truth_header(int legs) {
  std::string h = "t,p_x,p_y,p_z,v_x,v_y,v_z,q_s,q_x,q_y,q_z";
  for (int j = 0; j < legs; ++j) {
    const std::string n = std::to_string(j);
    for (const char* axis : {"x", "y", "z"}) h += ",s" + n + "_" + axis;
    for (const char* axis : {"x", "y", "z"}) h += ",ds" + n + "_" + axis;
    h += ",qf" + n + "_s,qf" + n + "_x,qf" + n + "_y,qf" + n + "_z";
  }
  return h;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_sensor_csv(const std::string& path, const DatasetMeta& meta,
                      const std::vector<SensorRecord>& records) {
  std::ofstream f(path);
  if (!f) throw io_error(path, "cannot open for writing");
  f << meta_line(meta) << "\n" << sensor_header(meta.num_legs) << "\n";
  std::string row;
  for (const auto& r : records) {
    row = format_double(r.t);
    append_vec(&row, r.accel_body);
    append_vec(&row, r.gyro_body);
    for (const auto& ch : r.legs) {
      append_vec(&row, ch.accel_foot);
      append_vec(&row, ch.gyro_foot);
      append_vec(&row, ch.joint_angle);
      append_vec(&row, ch.joint_rate);
      row += ',';
      row += format_double(ch.contact);
    }
    f << row << "\n";
  }
  if (!f) throw io_error(path, "write failed");
}

void write_truth_csv(const std::string& path, const DatasetMeta& meta,
                     const std::vector<TruthRecord>& records) {
  std::ofstream f(path);
  if (!f) throw io_error(path, "cannot open for writing");
  f << meta_line(meta) << "\n" << truth_header(meta.num_legs) << "\n";
  std::string row;
  for (const auto& r : records) {
    row = format_double(r.t);
    append_vec(&row, r.p);
    append_vec(&row, r.v);
    append_quat(&row, r.q);
    for (const auto& leg : r.legs) {
      append_vec(&row, leg.s);
      append_vec(&row, leg.ds);
      append_quat(&row, leg.qf);
    }
    f << row << "\n";
  }
  if (!f) throw io_error(path, "write failed");
}

SensorDataset read_sensor_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error(path, "cannot open");
  SensorDataset out;
  std::string line;
  if (!std::getline(f, line)) throw io_error(path, "empty file");
  out.meta = parse_meta(path, line);
  const int legs = out.meta.num_legs;
  if (!std::getline(f, line)) throw io_error(path, "missing header row");
  if (line != sensor_header(legs)) throw io_error(path, "header mismatch");

  const int expect = 1 + 6 + 16 * legs;
  int line_no = 2;
  double prev_t = -1.0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto v = split_row(path, line_no, line, expect);
    SensorRecord r;
    r.t = v[0];
    if (r.t <= prev_t) throw line_error(path, line_no, "non-increasing timestamp");
    prev_t = r.t;
    r.accel_body = Vec3(v[1], v[2], v[3]);
    r.gyro_body = Vec3(v[4], v[5], v[6]);
    r.legs.resize(legs);
    int c = 7;
    for (int j = 0; j < legs; ++j) {
      auto& ch = r.legs[j];
      ch.accel_foot = Vec3(v[c], v[c + 1], v[c + 2]);
      ch.gyro_foot = Vec3(v[c + 3], v[c + 4], v[c + 5]);
      ch.joint_angle = Vec3(v[c + 6], v[c + 7], v[c + 8]);
      ch.joint_rate = Vec3(v[c + 9], v[c + 10], v[c + 11]);
      ch.contact = v[c + 12];
      c += 13;
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

TruthDataset read_truth_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error(path, "cannot open");
  TruthDataset out;
  std::string line;
  if (!std::getline(f, line)) throw io_error(path, "empty file");
  out.meta = parse_meta(path, line);
  const int legs = out.meta.num_legs;
  if (!std::getline(f, line)) throw io_error(path, "missing header row");
  if (line != truth_header(legs)) throw io_error(path, "header mismatch");

  const int expect = 1 + 10 + 10 * legs;
  int line_no = 2;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto v = split_row(path, line_no, line, expect);
    TruthRecord r;
    r.t = v[0];
    r.p = Vec3(v[1], v[2], v[3]);
    r.v = Vec3(v[4], v[5], v[6]);
    r.q = UnitQuaternion(v[7], Vec3(v[8], v[9], v[10]));
    r.legs.resize(legs);
    int c = 11;
    for (int j = 0; j < legs; ++j) {
      auto& leg = r.legs[j];
      leg.s = Vec3(v[c], v[c + 1], v[c + 2]);
      leg.ds = Vec3(v[c + 3], v[c + 4], v[c + 5]);
      leg.qf = UnitQuaternion(v[c + 6], Vec3(v[c + 7], v[c + 8], v[c + 9]));
      c += 10;
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectoryRow>& rows) {
  std::ofstream f(path);
  if (!f) throw io_error(path, "cannot open for writing");
  f << "t,p_x,p_y,p_z,v_x,v_y,v_z,q_s,q_x,q_y,q_z\n";
  std::string row;
  for (const auto& r : rows) {
    row = format_double(r.t);
    append_vec(&row, r.p);
    append_vec(&row, r.v);
    for (int i = 0; i < 4; ++i) {
      row += ',';
      row += format_double(r.q(i));
    }
    f << row << "\n";
  }
  if (!f) throw io_error(path, "write failed");
}

std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error(path, "cannot open");
  std::string line;
  if (!std::getline(f, line)) throw io_error(path, "empty file");
  std::vector<TrajectoryRow> out;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto v = split_row(path, line_no, line, 11);
    TrajectoryRow r;
    r.t = v[0];
    r.p = Vec3(v[1], v[2], v[3]);
    r.v = Vec3(v[4], v[5], v[6]);
    r.q = Vec4(v[7], v[8], v[9], v[10]);
    out.push_back(r);
  }
  return out;
}

void write_diagnostics_csv(const std::string& path,
                           const std::vector<DiagnosticsRow>& rows) {
  std::ofstream f(path);
  if (!f) throw io_error(path, "cannot open for writing");
  const int legs = rows.empty() ? 0 : static_cast<int>(rows[0].gate.size());
  std::string h = "t";
  for (int j = 0; j < legs; ++j) h += ",mahal" + std::to_string(j);
  for (int j = 0; j < legs; ++j) h += ",gate" + std::to_string(j);
  h += ",saturation";
  f << h << "\n";
  for (const auto& r : rows) {
    std::string row = format_double(r.t);
    for (double m : r.mahalanobis) {
      row += ',';
      row += format_double(m);
    }
    for (int g : r.gate) {
      row += ',';
      row += std::to_string(g);
    }
    row += ',';
    row += std::to_string(r.saturation);
    f << row << "\n";
  }
  if (!f) throw io_error(path, "write failed");
}

}  // namespace mipo
