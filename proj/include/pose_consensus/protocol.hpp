#pragma once

// Line-delimited JSON messages exchanged with pose-estimator backends.
//
//   backend -> host   {"type":"hello","protocol":1,"backend":..,"version":..}
//   host -> backend   {"type":"hello-ack","protocol":1}
//   host -> backend   {"type":"estimate","id":..,"frames":[..]}
//   backend -> host   {"type":"result","id":..,"status":"ok"|"failed",
//                      "rotation":[9 numbers, row-major],"translation":[3]}
//
// The result carries the relative pose from frames[0] to frames[1].

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pose_consensus/error.hpp"
#include "pose_consensus/geometry.hpp"

namespace pose_consensus {

inline constexpr int kProtocolVersion = 1;

// Largest elementwise change tolerated when snapping a wire rotation onto
// SO(3); anything further off is rejected as malformed.
inline constexpr double kIngestionTolerance = 1e-3;

struct EstimatorRequest {
  std::string request_id;
  std::vector<std::string> frames;  // I_A, I_B, then interior frames by index

  bool operator==(const EstimatorRequest&) const = default;
};

enum class ResponseStatus { ok, failed };

struct EstimatorResponse {
  std::string request_id;
  ResponseStatus status = ResponseStatus::failed;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // as received
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  bool ok() const { return status == ResponseStatus::ok; }

  bool operator==(const EstimatorResponse& rhs) const {
    return request_id == rhs.request_id && status == rhs.status && rotation == rhs.rotation &&
           translation == rhs.translation;
  }
};

struct Hello {
  int protocol = kProtocolVersion;
  std::string backend;
  std::string version;
};

namespace detail {

inline nlohmann::json parse_line(const std::string& line) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponse(std::string("unparseable message: ") + e.what());
  }
}

inline std::vector<double> number_array(const nlohmann::json& j, const char* field, std::size_t n) {
  if (!j.contains(field) || !j[field].is_array() || j[field].size() != n) {
    throw MalformedResponse(std::string("field '") + field + "' must be an array of " + std::to_string(n));
  }
  std::vector<double> out;
  out.reserve(n);
  for (const auto& v : j[field]) {
    if (!v.is_number()) throw MalformedResponse(std::string("field '") + field + "' has a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::string string_field(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_string()) {
    throw MalformedResponse(std::string("missing string field '") + field + "'");
  }
  return j[field].get<std::string>();
}

}  // namespace detail

inline std::string serialize_request(const EstimatorRequest& req) {
  nlohmann::ordered_json j;
  j["type"] = "estimate";
  j["id"] = req.request_id;
  j["frames"] = req.frames;
  return j.dump();
}

inline EstimatorRequest parse_request(const std::string& line) {
  const auto j = detail::parse_line(line);
  if (!j.is_object() || j.value("type", "") != "estimate") throw MalformedResponse("not an estimate request");
  EstimatorRequest req;
  req.request_id = detail::string_field(j, "id");
  if (!j.contains("frames") || !j["frames"].is_array()) throw MalformedResponse("missing frames");
  for (const auto& f : j["frames"]) {
    if (!f.is_string()) throw MalformedResponse("frame reference must be a string");
    req.frames.push_back(f.get<std::string>());
  }
  if (req.frames.size() < 2) throw MalformedResponse("request needs at least two frames");
  return req;
}

inline std::string serialize_response(const EstimatorResponse& resp) {
  nlohmann::ordered_json j;
  j["type"] = "result";
  j["id"] = resp.request_id;
  j["status"] = resp.ok() ? "ok" : "failed";
  nlohmann::ordered_json rot = nlohmann::ordered_json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(resp.rotation(r, c));
  }
  j["rotation"] = rot;
  j["translation"] = {resp.translation.x(), resp.translation.y(), resp.translation.z()};
  return j.dump();
}

// Parses a result line as received, without touching the rotation.
inline EstimatorResponse parse_response(const std::string& line) {
  const auto j = detail::parse_line(line);
  if (!j.is_object() || j.value("type", "") != "result") throw MalformedResponse("not a result message");
  EstimatorResponse resp;
  resp.request_id = detail::string_field(j, "id");
  const std::string status = detail::string_field(j, "status");
  if (status == "ok") {
    resp.status = ResponseStatus::ok;
  } else if (status == "failed") {
    resp.status = ResponseStatus::failed;
    return resp;  // pose fields are optional on failure
  } else {
    throw MalformedResponse("unknown status '" + status + "'");
  }
  const auto rot = detail::number_array(j, "rotation", 9);
  const auto trans = detail::number_array(j, "translation", 3);
  for (int i = 0; i < 9; ++i) resp.rotation(i / 3, i % 3) = rot[static_cast<std::size_t>(i)];
  resp.translation = {trans[0], trans[1], trans[2]};
  if (!resp.rotation.allFinite() || !resp.translation.allFinite()) {
    throw MalformedResponse("non-finite pose values");
  }
  return resp;
}

// Result of ingesting a response line: the parsed response plus, for ok
// responses, the pose with its rotation projected exactly onto SO(3).
struct IngestedResponse {
  EstimatorResponse response;
  std::optional<RelativePose> pose;
};

// Throws MalformedResponse when the line does not parse, the id does not
// match `expected_id` (when given), or the rotation is further than
// kIngestionTolerance from the nearest rotation.
inline IngestedResponse ingest_response(const std::string& line,
                                        const std::optional<std::string>& expected_id = std::nullopt) {
  IngestedResponse out{parse_response(line), std::nullopt};
  if (expected_id && out.response.request_id != *expected_id) {
    throw MalformedResponse("response id '" + out.response.request_id + "' does not match request '" +
                            *expected_id + "'");
  }
  if (!out.response.ok()) return out;
  Rotation projected;
  try {
    projected = Rotation::project(out.response.rotation);
  } catch (const DegenerateMatrix&) {
    throw MalformedResponse("rotation is rank deficient");
  }
  const double residual = (projected.matrix() - out.response.rotation).cwiseAbs().maxCoeff();
  if (!(residual < kIngestionTolerance)) throw MalformedResponse("rotation is not close to SO(3)");
  out.pose = RelativePose{projected, out.response.translation};
  return out;
}

inline std::string serialize_hello(const Hello& h) {
  nlohmann::ordered_json j;
  j["type"] = "hello";
  j["protocol"] = h.protocol;
  j["backend"] = h.backend;
  j["version"] = h.version;
  return j.dump();
}

inline Hello parse_hello(const std::string& line) {
  const auto j = detail::parse_line(line);
  if (!j.is_object() || j.value("type", "") != "hello") throw MalformedResponse("expected hello");
  if (!j.contains("protocol") || !j["protocol"].is_number_integer()) throw MalformedResponse("hello lacks protocol");
  return {j["protocol"].get<int>(), detail::string_field(j, "backend"), detail::string_field(j, "version")};
}

inline std::string serialize_hello_ack() {
  nlohmann::ordered_json j;
  j["type"] = "hello-ack";
  j["protocol"] = kProtocolVersion;
  return j.dump();
}

inline bool is_hello_ack(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    return j.is_object() && j.value("type", "") == "hello-ack" && j.value("protocol", 0) == kProtocolVersion;
  } catch (const nlohmann::json::exception&) {
    return false;
  }
}

}  // namespace pose_consensus
