#pragma once

// Dataset manifests, video registries, pair selection by yaw change, and
// the evaluation metrics: mean rotation / translation error, accuracy at
// 5/15/30 degrees, and AUC over thresholds 1..30 degrees.

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pose_consensus/consensus.hpp"
#include "pose_consensus/counter_rng.hpp"
#include "pose_consensus/json_io.hpp"
#include "pose_consensus/records.hpp"

namespace pose_consensus {

enum class Facing { outward, center };

struct PairRecord {
  std::string pair_id;
  std::string image_a;
  std::string image_b;
  Pose t_a;  // world-to-camera
  Pose t_b;
  bool rotation_only_eval = false;

  RelativePose ground_truth() const { return relative_pose(t_a, t_b); }
};

struct DatasetManifest {
  std::string name;
  Eigen::Vector3d up_axis = Eigen::Vector3d::UnitY();
  Facing facing = Facing::outward;
  std::vector<PairRecord> pairs;

  const PairRecord* find(const std::string& pair_id) const {
    for (const auto& p : pairs) {
      if (p.pair_id == pair_id) return &p;
    }
    return nullptr;
  }

  double delta_yaw(const PairRecord& p, YawMode mode = YawMode::twist) const {
    return pose_consensus::delta_yaw(p.t_a, p.t_b, up_axis, mode);
  }
};

inline DatasetManifest manifest_from_json(const json_io::Json& j) {
  if (!j.is_object() || j.value("schema_version", 0) != 1) {
    throw InvalidManifest("manifest: schema_version must be 1");
  }
  DatasetManifest m;
  m.name = j.value("name", "");
  if (j.contains("up_axis")) {
    const auto v = json_io::numbers(j, "up_axis", 3, "manifest");
    m.up_axis = {v[0], v[1], v[2]};
    if (std::abs(m.up_axis.norm() - 1.0) > 1e-6) throw InvalidManifest("manifest: up_axis must be unit length");
    m.up_axis.normalize();
  }
  const std::string facing = j.value("facing", "outward");
  if (facing == "outward") {
    m.facing = Facing::outward;
  } else if (facing == "center") {
    m.facing = Facing::center;
  } else {
    throw InvalidManifest("manifest: facing must be 'outward' or 'center'");
  }
  if (!j.contains("pairs") || !j["pairs"].is_array()) throw InvalidManifest("manifest: missing pairs");
  std::set<std::string> seen;
  for (const auto& jp : j["pairs"]) {
    PairRecord p;
    p.pair_id = jp.at("pair_id").get<std::string>();
    if (!seen.insert(p.pair_id).second) throw InvalidManifest("manifest: duplicate pair_id " + p.pair_id);
    p.image_a = jp.at("image_a").get<std::string>();
    p.image_b = jp.at("image_b").get<std::string>();
    p.t_a = json_io::transform_from_json(jp, "t_a", p.pair_id);
    p.t_b = json_io::transform_from_json(jp, "t_b", p.pair_id);
    p.rotation_only_eval = jp.value("rotation_only_eval", false);
    m.pairs.push_back(std::move(p));
  }
  return m;
}

inline json_io::Json manifest_to_json(const DatasetManifest& m) {
  json_io::Json j;
  j["schema_version"] = 1;
  j["name"] = m.name;
  j["up_axis"] = json_io::vector_to_json(m.up_axis);
  j["facing"] = m.facing == Facing::outward ? "outward" : "center";
  json_io::Json pairs = json_io::Json::array();
  for (const auto& p : m.pairs) {
    json_io::Json jp;
    jp["pair_id"] = p.pair_id;
    jp["image_a"] = p.image_a;
    jp["image_b"] = p.image_b;
    jp["t_a"] = json_io::transform_to_json(p.t_a);
    jp["t_b"] = json_io::transform_to_json(p.t_b);
    jp["rotation_only_eval"] = p.rotation_only_eval;
    pairs.push_back(jp);
  }
  j["pairs"] = pairs;
  return j;
}

inline DatasetManifest load_manifest(const std::string& path) { return manifest_from_json(json_io::read_file(path)); }

struct VideoRegistry {
  std::map<std::string, std::vector<VideoRecord>> videos;  // by pair_id

  const std::vector<VideoRecord>& for_pair(const std::string& pair_id) const {
    static const std::vector<VideoRecord> kNone;
    const auto it = videos.find(pair_id);
    return it == videos.end() ? kNone : it->second;
  }
};

inline VideoRegistry registry_from_json(const json_io::Json& j) {
  if (!j.is_object() || j.value("schema_version", 0) != 1) {
    throw InvalidManifest("registry: schema_version must be 1");
  }
  VideoRegistry reg;
  for (const auto& [pair_id, list] : j.at("videos").items()) {
    std::set<std::string> seen;
    auto& out = reg.videos[pair_id];
    for (const auto& jv : list) {
      VideoRecord v;
      v.video_id = jv.at("video_id").get<std::string>();
      if (!seen.insert(v.video_id).second) {
        throw InvalidManifest("registry: duplicate video_id " + v.video_id + " in pair " + pair_id);
      }
      v.generator = jv.value("generator", "");
      v.prompt_id = jv.value("prompt_id", "");
      const std::string dir = jv.value("direction", "ab");
      if (dir != "ab" && dir != "ba") throw InvalidManifest("registry: direction must be 'ab' or 'ba'");
      v.direction = dir == "ab" ? Direction::ab : Direction::ba;
      v.frames = jv.at("frames").get<std::vector<std::string>>();
      if (v.frames.empty()) throw InvalidManifest("registry: video " + v.video_id + " has no frames");
      out.push_back(std::move(v));
    }
  }
  return reg;
}

inline json_io::Json registry_to_json(const VideoRegistry& reg) {
  json_io::Json j;
  j["schema_version"] = 1;
  json_io::Json videos = json_io::Json::object();
  for (const auto& [pair_id, list] : reg.videos) {
    json_io::Json arr = json_io::Json::array();
    for (const auto& v : list) {
      json_io::Json jv;
      jv["video_id"] = v.video_id;
      jv["generator"] = v.generator;
      jv["prompt_id"] = v.prompt_id;
      jv["direction"] = to_string(v.direction);
      jv["frames"] = v.frames;
      arr.push_back(jv);
    }
    videos[pair_id] = arr;
  }
  j["videos"] = videos;
  return j;
}

inline VideoRegistry load_registry(const std::string& path) { return registry_from_json(json_io::read_file(path)); }

// Seeded uniform sample (without replacement) of up to `count` pairs whose
// delta yaw lies in [yaw_min_deg, yaw_max_deg]. Eligibility and shuffling
// run over pair ids in sorted order, so manifest ordering has no effect.
// The returned ids are sorted.
inline std::vector<std::string> select_pairs(const DatasetManifest& manifest, double yaw_min_deg, double yaw_max_deg,
                                             std::size_t count, std::uint64_t seed,
                                             YawMode mode = YawMode::twist) {
  if (yaw_min_deg > yaw_max_deg) throw Error("select_pairs: yaw_min exceeds yaw_max");
  std::vector<const PairRecord*> sorted;
  for (const auto& p : manifest.pairs) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->pair_id < b->pair_id; });

  std::vector<std::string> eligible;
  for (const auto* p : sorted) {
    const double yaw = manifest.delta_yaw(*p, mode);
    if (yaw >= yaw_min_deg && yaw <= yaw_max_deg) eligible.push_back(p->pair_id);
  }
  if (eligible.empty()) throw EmptySelection("no pair has delta yaw in the requested range");

  CounterRng rng(seed, stream_key("select_pairs"));
  const std::size_t take = std::min(count, eligible.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(take);
  std::sort(eligible.begin(), eligible.end());
  return eligible;
}

struct ErrorRow {
  std::string pair_id;
  Variant variant = Variant::medoid;
  double rot_err_deg = 0.0;
  std::optional<double> trans_err_deg;  // absent for rotation-only pairs
  std::optional<std::string> selected_video_id;
};

struct PairErrors {
  double rot_err_deg = 0.0;
  std::optional<double> trans_err_deg;
};

// Rotation and translation-direction errors in degrees. Translation error is
// absent when evaluating rotation only or when the ground truth has no
// translation; an estimate without a usable direction scores 90 degrees.
inline PairErrors pair_errors(const RelativePose& estimate, const RelativePose& gt, bool rotation_only) {
  PairErrors e;
  e.rot_err_deg = rad_to_deg(dist_rot(estimate.rotation, gt.rotation));
  if (!rotation_only && gt.translation_defined()) {
    const TranslationAngle t = dist_trans(estimate.translation, gt.translation);
    e.trans_err_deg = t.defined ? rad_to_deg(t.rad) : 90.0;
  }
  return e;
}

inline PairErrors pair_errors(const ConsensusResult& result, const RelativePose& gt, bool rotation_only) {
  return pair_errors(result.pose, gt, rotation_only);
}

inline constexpr std::array<int, 3> kAccuracyThresholds{5, 15, 30};
inline constexpr int kAucMaxThreshold = 30;

struct CurvePoint {
  int threshold_deg = 0;
  double rot_acc = 0.0;  // percent
  double trans_acc = 0.0;
  double joint_acc = 0.0;
};

struct Aggregates {
  std::size_t count = 0;
  std::size_t trans_count = 0;
  double mre = 0.0;
  std::optional<double> mte;
  std::array<double, 3> r_acc{};  // at kAccuracyThresholds, percent
  std::optional<std::array<double, 3>> t_acc;
  double auc30 = 0.0;       // joint max(rot, trans) convention
  double auc30_mean = 0.0;  // mean of separate rotation and translation AUCs
  std::vector<CurvePoint> curve;
};

namespace detail {

// Percentage of rows with value < threshold; counts stay integral so the
// result is reproducible bit-for-bit.
inline double percent_below(const std::vector<double>& values, double threshold) {
  if (values.empty()) return 0.0;
  std::size_t n = 0;
  for (const double v : values) n += v < threshold ? 1 : 0;
  return 100.0 * static_cast<double>(n) / static_cast<double>(values.size());
}

}  // namespace detail

// Throws EmptyReport for an empty row list. Rows without a translation error
// contribute to AUC through their rotation error alone.
inline Aggregates aggregate(const std::vector<ErrorRow>& rows) {
  if (rows.empty()) throw EmptyReport("no rows to aggregate");
  std::vector<double> rot, trans, joint;
  for (const auto& r : rows) {
    rot.push_back(r.rot_err_deg);
    if (r.trans_err_deg) trans.push_back(*r.trans_err_deg);
    joint.push_back(r.trans_err_deg ? std::max(r.rot_err_deg, *r.trans_err_deg) : r.rot_err_deg);
  }
  Aggregates a;
  a.count = rows.size();
  a.trans_count = trans.size();
  double sum = 0.0;
  for (const double v : rot) sum += v;
  a.mre = sum / static_cast<double>(rot.size());
  if (!trans.empty()) {
    double tsum = 0.0;
    for (const double v : trans) tsum += v;
    a.mte = tsum / static_cast<double>(trans.size());
  }
  for (std::size_t i = 0; i < kAccuracyThresholds.size(); ++i) {
    a.r_acc[i] = detail::percent_below(rot, kAccuracyThresholds[i]);
  }
  if (!trans.empty()) {
    std::array<double, 3> t{};
    for (std::size_t i = 0; i < kAccuracyThresholds.size(); ++i) {
      t[i] = detail::percent_below(trans, kAccuracyThresholds[i]);
    }
    a.t_acc = t;
  }
  double joint_sum = 0.0, rot_sum = 0.0, trans_sum = 0.0;
  for (int tau = 1; tau <= kAucMaxThreshold; ++tau) {
    CurvePoint p;
    p.threshold_deg = tau;
    p.rot_acc = detail::percent_below(rot, tau);
    p.trans_acc = detail::percent_below(trans, tau);
    p.joint_acc = detail::percent_below(joint, tau);
    joint_sum += p.joint_acc;
    rot_sum += p.rot_acc;
    trans_sum += p.trans_acc;
    a.curve.push_back(p);
  }
  a.auc30 = joint_sum / kAucMaxThreshold;
  a.auc30_mean = trans.empty() ? rot_sum / kAucMaxThreshold : (rot_sum + trans_sum) / (2.0 * kAucMaxThreshold);
  return a;
}

struct YawBucket {
  double lo_deg = 0.0;
  double hi_deg = 0.0;
  std::size_t count = 0;
  std::optional<Aggregates> aggregates;  // absent for empty buckets
};

// Partitions rows by pair delta yaw into half-open buckets [e_i, e_{i+1}).
// Rows outside every bucket are dropped.
inline std::vector<YawBucket> yaw_sweep(const std::vector<ErrorRow>& rows, const std::map<std::string, double>& yaw_by_pair,
                                        const std::vector<double>& edges_deg) {
  for (std::size_t i = 1; i < edges_deg.size(); ++i) {
    if (!(edges_deg[i] > edges_deg[i - 1])) throw Error("yaw_sweep: bucket edges must be strictly increasing");
  }
  std::vector<YawBucket> out;
  for (std::size_t i = 0; i + 1 < edges_deg.size(); ++i) {
    YawBucket b;
    b.lo_deg = edges_deg[i];
    b.hi_deg = edges_deg[i + 1];
    std::vector<ErrorRow> members;
    for (const auto& r : rows) {
      const auto it = yaw_by_pair.find(r.pair_id);
      if (it != yaw_by_pair.end() && it->second >= b.lo_deg && it->second < b.hi_deg) members.push_back(r);
    }
    b.count = members.size();
    if (!members.empty()) b.aggregates = aggregate(members);
    out.push_back(std::move(b));
  }
  return out;
}

inline std::map<std::string, double> yaw_table(const DatasetManifest& m, YawMode mode = YawMode::twist) {
  std::map<std::string, double> out;
  for (const auto& p : m.pairs) out[p.pair_id] = m.delta_yaw(p, mode);
  return out;
}

}  // namespace pose_consensus
