#pragma once

// Desk-scale stand-in for "generate a video, then run a multi-view pose
// estimator on a frame subset". Each scenario fixes a ground-truth relative
// pose and a quality class per video:
//
//   consistent        every subset lands near the ground truth (small sigma)
//   inconsistent      every subset lands somewhere else (large sigma)
//   degenerate_wrong  every subset lands tightly around a wrong pose
//                     (ground truth composed with a fixed offset)
//
// Noise is a rotation of half-normal(sigma_rot) angle about a uniform axis,
// plus a tilt of the translation direction by half-normal(sigma_dir) about a
// uniform perpendicular axis. Draws are keyed by request content, so equal
// requests always produce equal answers.

#include <charconv>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pose_consensus/counter_rng.hpp"
#include "pose_consensus/digest.hpp"
#include "pose_consensus/estimator.hpp"
#include "pose_consensus/json_io.hpp"
#include "pose_consensus/sampling.hpp"

namespace pose_consensus {

enum class VideoQuality { consistent, inconsistent, degenerate_wrong };

inline const char* to_string(VideoQuality q) {
  switch (q) {
    case VideoQuality::consistent: return "consistent";
    case VideoQuality::inconsistent: return "inconsistent";
    case VideoQuality::degenerate_wrong: return "degenerate_wrong";
  }
  return "?";
}

inline VideoQuality parse_quality(std::string_view s) {
  if (s == "consistent") return VideoQuality::consistent;
  if (s == "inconsistent") return VideoQuality::inconsistent;
  if (s == "degenerate_wrong") return VideoQuality::degenerate_wrong;
  throw InvalidManifest("unknown video quality '" + std::string(s) + "'");
}

struct NoiseSpec {
  double sigma_rot = 0.0;  // radians
  double sigma_dir = 0.0;  // radians
};

struct SyntheticVideoSpec {
  std::string video_id;
  VideoQuality quality = VideoQuality::consistent;
  RelativePose center_offset;
  NoiseSpec noise;
};

struct SyntheticScenario {
  std::string pair_id;
  RelativePose ground_truth;
  NoiseSpec pair_noise;
  std::vector<SyntheticVideoSpec> videos;
  std::uint64_t seed = 0;

  void validate() const {
    auto bad = [](const NoiseSpec& n) { return !(n.sigma_rot >= 0.0) || !(n.sigma_dir >= 0.0); };
    if (bad(pair_noise)) throw InvalidManifest(pair_id + ": negative pair noise");
    for (const auto& v : videos) {
      if (bad(v.noise)) throw InvalidManifest(pair_id + "/" + v.video_id + ": negative noise");
      if (v.quality == VideoQuality::degenerate_wrong &&
          dist_rot(Rotation::identity(), v.center_offset.rotation) == 0.0 && v.center_offset.translation.isZero()) {
        throw InvalidManifest(pair_id + "/" + v.video_id + ": degenerate_wrong needs a nonzero center offset");
      }
    }
  }

  const SyntheticVideoSpec* find_video(std::string_view id) const {
    for (const auto& v : videos) {
      if (v.video_id == id) return &v;
    }
    return nullptr;
  }
};

// Applies one noise draw to `center`. Always consumes the same number of
// random values so streams stay aligned whatever the sigmas are.
inline RelativePose perturb(const RelativePose& center, const NoiseSpec& noise, CounterRng& rng) {
  const double rot_angle = std::abs(rng.normal()) * noise.sigma_rot;
  const Eigen::Vector3d rot_axis = rng.unit_vector();
  const double dir_angle = std::abs(rng.normal()) * noise.sigma_dir;
  const Eigen::Vector3d dir_seed = rng.unit_vector();

  RelativePose out = center;
  if (rot_angle != 0.0) out.rotation = Rotation::about(rot_axis, rot_angle) * center.rotation;
  if (dir_angle != 0.0 && center.translation_defined()) {
    const Eigen::Vector3d u = center.translation.normalized();
    Eigen::Vector3d perp = dir_seed - dir_seed.dot(u) * u;
    if (perp.norm() < 1e-6) perp = u.unitOrthogonal();
    out.translation = Rotation::about(perp, dir_angle) * center.translation;
  }
  return out;
}

inline std::string subset_text(const FrameSubset& subset) {
  std::string s;
  for (const int i : subset.interior_indices) {
    if (!s.empty()) s += ',';
    s += std::to_string(i);
  }
  return s;
}

// Estimate from the input pair alone.
inline RelativePose synthetic_pair_sample(const SyntheticScenario& sc) {
  CounterRng rng(sc.seed, stream_key("pair-only", sc.pair_id));
  return perturb(sc.ground_truth, sc.pair_noise, rng);
}

// Estimate from the anchors plus `subset` of video `video_ordinal`.
inline RelativePose synthetic_sample(const SyntheticScenario& sc, std::size_t video_ordinal,
                                     const FrameSubset& subset) {
  const SyntheticVideoSpec& v = sc.videos.at(video_ordinal);
  CounterRng rng(sc.seed, stream_key("video", sc.pair_id, v.video_id, subset_text(subset)));
  const RelativePose center =
      v.quality == VideoQuality::consistent ? sc.ground_truth : sc.ground_truth.compose(v.center_offset);
  return perturb(center, v.noise, rng);
}

// Virtual frame references understood by SyntheticBackend. Identifiers must
// not contain ':'.
inline std::string virtual_anchor(const std::string& pair_id, char which) {
  return "synth:" + pair_id + ":" + which;
}

inline std::string virtual_frame(const std::string& pair_id, const std::string& video_id, int index) {
  return "synth:" + pair_id + ":" + video_id + ":" + std::to_string(index);
}

struct ScenarioSet {
  std::uint64_t seed = 0;
  std::map<std::string, SyntheticScenario> pairs;
};

inline json_io::Json scenario_to_json(const ScenarioSet& set) {
  using json_io::Json;
  Json j;
  j["schema_version"] = 1;
  j["seed"] = set.seed;
  Json pairs = Json::object();
  for (const auto& [id, sc] : set.pairs) {
    Json p;
    p["ground_truth"] = json_io::relative_pose_to_json(sc.ground_truth);
    p["pair_noise"] = {{"sigma_rot_rad", sc.pair_noise.sigma_rot}, {"sigma_dir_rad", sc.pair_noise.sigma_dir}};
    Json videos = Json::array();
    for (const auto& v : sc.videos) {
      Json jv;
      jv["video_id"] = v.video_id;
      jv["quality"] = to_string(v.quality);
      jv["center_offset"] = json_io::relative_pose_to_json(v.center_offset);
      jv["sigma_rot_rad"] = v.noise.sigma_rot;
      jv["sigma_dir_rad"] = v.noise.sigma_dir;
      videos.push_back(jv);
    }
    p["videos"] = videos;
    pairs[id] = p;
  }
  j["pairs"] = pairs;
  return j;
}

inline ScenarioSet scenario_from_json(const json_io::Json& j) {
  if (j.value("schema_version", 0) != 1) throw InvalidManifest("scenario: unsupported schema_version");
  ScenarioSet set;
  set.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& [id, p] : j.at("pairs").items()) {
    SyntheticScenario sc;
    sc.pair_id = id;
    sc.seed = set.seed;
    sc.ground_truth = json_io::relative_pose_from_json(p.at("ground_truth"), id);
    sc.pair_noise = {p.at("pair_noise").at("sigma_rot_rad").get<double>(),
                     p.at("pair_noise").at("sigma_dir_rad").get<double>()};
    for (const auto& jv : p.at("videos")) {
      SyntheticVideoSpec v;
      v.video_id = jv.at("video_id").get<std::string>();
      v.quality = parse_quality(jv.at("quality").get<std::string>());
      v.center_offset = json_io::relative_pose_from_json(jv.at("center_offset"), id + "/" + v.video_id);
      v.noise = {jv.at("sigma_rot_rad").get<double>(), jv.at("sigma_dir_rad").get<double>()};
      sc.videos.push_back(std::move(v));
    }
    sc.validate();
    set.pairs.emplace(id, std::move(sc));
  }
  return set;
}

// Backend answering requests over virtual frames from a ScenarioSet. The
// version string includes a digest of the scenario, so cached results never
// leak between scenarios. Thread-safe: do_call reads only immutable state.
class SyntheticBackend final : public EstimatorBackend {
 public:
  explicit SyntheticBackend(ScenarioSet set)
      : set_(std::move(set)), version_("1+" + sha256_hex(scenario_to_json(set_).dump()).substr(0, 16)) {}

  std::string id() const override { return "synthetic"; }
  std::string version() const override { return version_; }
  const ScenarioSet& scenarios() const { return set_; }

 protected:
  std::string do_call(const EstimatorRequest& req) override {
    EstimatorResponse resp;
    resp.request_id = req.request_id;
    if (auto pose = answer(req)) {
      resp.status = ResponseStatus::ok;
      resp.rotation = pose->rotation.matrix();
      resp.translation = pose->translation;
    }
    return serialize_response(resp);
  }

 private:
  std::optional<RelativePose> answer(const EstimatorRequest& req) const {
    constexpr std::string_view kPrefix = "synth:";
    const std::string& a = req.frames.at(0);
    if (a.rfind(kPrefix, 0) != 0 || a.size() < kPrefix.size() + 2 || a.substr(a.size() - 2) != ":A") {
      return std::nullopt;
    }
    const std::string pair_id = a.substr(kPrefix.size(), a.size() - kPrefix.size() - 2);
    const auto it = set_.pairs.find(pair_id);
    if (it == set_.pairs.end() || req.frames.at(1) != virtual_anchor(pair_id, 'B')) return std::nullopt;
    const SyntheticScenario& sc = it->second;
    if (req.frames.size() == 2) return synthetic_pair_sample(sc);

    const std::string frame_prefix = std::string(kPrefix) + pair_id + ":";
    std::string video_id;
    FrameSubset subset;
    for (std::size_t i = 2; i < req.frames.size(); ++i) {
      const std::string& f = req.frames[i];
      if (f.rfind(frame_prefix, 0) != 0) return std::nullopt;
      const std::string rest = f.substr(frame_prefix.size());
      const auto colon = rest.rfind(':');
      if (colon == std::string::npos) return std::nullopt;
      const std::string vid = rest.substr(0, colon);
      if (!video_id.empty() && vid != video_id) return std::nullopt;
      video_id = vid;
      int index = 0;
      const auto* first = rest.data() + colon + 1;
      const auto* last = rest.data() + rest.size();
      if (std::from_chars(first, last, index).ptr != last) return std::nullopt;
      subset.interior_indices.push_back(index);
    }
    for (std::size_t v = 0; v < sc.videos.size(); ++v) {
      if (sc.videos[v].video_id == video_id) return synthetic_sample(sc, v, subset);
    }
    return std::nullopt;
  }

  ScenarioSet set_;
  std::string version_;
};

}  // namespace pose_consensus
