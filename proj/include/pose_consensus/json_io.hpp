#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "pose_consensus/error.hpp"
#include "pose_consensus/geometry.hpp"

namespace pose_consensus::json_io {

using Json = nlohmann::ordered_json;

inline Json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidManifest(path + ": " + e.what());
  }
}

// Pretty-printed with a trailing newline; byte-stable for equal documents.
inline void write_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out.flush()) throw IoError("cannot write " + path);
}

inline std::vector<double> numbers(const Json& j, const char* field, std::size_t n, const std::string& where) {
  if (!j.contains(field) || !j[field].is_array() || j[field].size() != n) {
    throw InvalidManifest(where + ": '" + field + "' must be an array of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (const auto& v : j[field]) {
    if (!v.is_number()) throw InvalidManifest(where + ": '" + field + "' holds a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

inline Json rotation_to_json(const Rotation& r) {
  Json a = Json::array();
  for (int i = 0; i < 9; ++i) a.push_back(r(i / 3, i % 3));
  return a;
}

inline Json vector_to_json(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

// Rotation from 9 row-major numbers, snapped onto SO(3) when within 1e-3.
inline Rotation rotation_from(const std::vector<double>& v, std::size_t offset, std::size_t stride,
                              const std::string& where) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = v[offset + static_cast<std::size_t>(r) * stride + static_cast<std::size_t>(c)];
  }
  Rotation projected;
  try {
    projected = Rotation::project(m);
  } catch (const DegenerateMatrix&) {
    throw InvalidManifest(where + ": rotation block is rank deficient");
  }
  if (!((projected.matrix() - m).cwiseAbs().maxCoeff() < 1e-3)) {
    throw InvalidManifest(where + ": rotation block is not a rotation");
  }
  return projected;
}

inline Json relative_pose_to_json(const RelativePose& p) {
  Json j;
  j["rotation"] = rotation_to_json(p.rotation);
  j["translation"] = vector_to_json(p.translation);
  return j;
}

inline RelativePose relative_pose_from_json(const Json& j, const std::string& where) {
  const auto r = numbers(j, "rotation", 9, where);
  const auto t = numbers(j, "translation", 3, where);
  return {rotation_from(r, 0, 3, where), {t[0], t[1], t[2]}};
}

// 4x4 row-major world-to-camera transform.
inline Json transform_to_json(const Pose& p) {
  const Eigen::Matrix4d m = p.matrix();
  Json a = Json::array();
  for (int i = 0; i < 16; ++i) a.push_back(m(i / 4, i % 4));
  return a;
}

inline Pose transform_from_json(const Json& j, const char* field, const std::string& where) {
  const auto v = numbers(j, field, 16, where);
  const double bottom = std::abs(v[12]) + std::abs(v[13]) + std::abs(v[14]) + std::abs(v[15] - 1.0);
  if (!(bottom <= 1e-9)) throw InvalidManifest(where + ": '" + field + "' bottom row must be (0,0,0,1)");
  Pose p;
  p.rotation = rotation_from(v, 0, 4, where + "." + field);
  p.translation = {v[3], v[7], v[11]};
  if (!p.translation.allFinite()) throw InvalidManifest(where + ": non-finite translation");
  return p;
}

}  // namespace pose_consensus::json_io
