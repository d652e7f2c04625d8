#pragma once

// Self-consistency scoring of generated videos and the aggregation variants
// built on it.
//
// For one video, m frame subsets each yield a relative pose estimate. The
// medoid distance D_med is the smallest mean distance from one estimate to
// all others; D_bias is the distance from that medoid to the estimate made
// from the input pair alone. The video with the lowest selection key (by
// default D_total = D_med + D_bias) wins, and its medoid is the output pose.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pose_consensus/error.hpp"
#include "pose_consensus/geometry.hpp"
#include "pose_consensus/sampling.hpp"

namespace pose_consensus {

enum class ScoreMode { total, med_only, bias_only };
enum class Variant { pair_only, medoid, average, oracle };

inline const char* to_string(ScoreMode m) {
  switch (m) {
    case ScoreMode::total: return "total";
    case ScoreMode::med_only: return "med-only";
    case ScoreMode::bias_only: return "bias-only";
  }
  return "?";
}

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::pair_only: return "pair_only";
    case Variant::medoid: return "medoid";
    case Variant::average: return "average";
    case Variant::oracle: return "oracle";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "pair_only" || s == "pair-only") return Variant::pair_only;
  if (s == "medoid") return Variant::medoid;
  if (s == "average") return Variant::average;
  if (s == "oracle") return Variant::oracle;
  return std::nullopt;
}

inline std::optional<ScoreMode> parse_score_mode(std::string_view s) {
  if (s == "total") return ScoreMode::total;
  if (s == "med-only" || s == "med_only") return ScoreMode::med_only;
  if (s == "bias-only" || s == "bias_only") return ScoreMode::bias_only;
  return std::nullopt;
}

// video_id of samples estimated from the input pair alone.
inline constexpr std::string_view kPairOnlyVideo = "__pair_only__";

enum class SampleStatus { ok, estimator_failed };

struct EstimateSample {
  std::string pair_id;
  std::string video_id;
  FrameSubset subset;
  SampleStatus status = SampleStatus::estimator_failed;
  std::optional<RelativePose> pose;  // engaged iff status == ok

  bool ok() const { return status == SampleStatus::ok && pose.has_value(); }
};

struct MedoidResult {
  std::size_t index = 0;
  double d_med = 0.0;
};

// Index minimizing the mean distance to every other sample; ties go to the
// lowest index. Throws InsufficientSamples for fewer than two samples.
inline MedoidResult medoid(std::span<const RelativePose> samples, bool rotation_only = false) {
  const std::size_t m = samples.size();
  if (m < 2) throw InsufficientSamples("medoid needs at least 2 samples");
  std::vector<double> dist(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      dist[i * m + j] = dist[j * m + i] = dist_pose(samples[i], samples[j], rotation_only).total_rad;
    }
  }
  // Each row is summed in sorted order so the result does not depend on the
  // order of the input list.
  MedoidResult best{0, std::numeric_limits<double>::infinity()};
  std::vector<double> row;
  for (std::size_t i = 0; i < m; ++i) {
    row.clear();
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) row.push_back(dist[i * m + j]);
    }
    std::sort(row.begin(), row.end());
    double sum = 0.0;
    for (const double d : row) sum += d;
    const double mean = sum / static_cast<double>(m - 1);
    if (mean < best.d_med) best = {i, mean};
  }
  return best;
}

struct VideoScore {
  std::string video_id;
  double d_med = 0.0;
  double d_bias = 0.0;  // 0 when no pair baseline was available
  double d_total = 0.0;
  bool has_bias = false;
  std::size_t medoid_index = 0;  // into the video's full sample list
  RelativePose medoid_pose;
  ScoreMode mode = ScoreMode::total;

  double key() const {
    switch (mode) {
      case ScoreMode::med_only: return d_med;
      case ScoreMode::bias_only: return d_bias;
      case ScoreMode::total: break;
    }
    return d_total;
  }
};

// Scores one video from its sample list. Failed samples are skipped; at
// least two ok samples are required.
inline VideoScore score_video(std::span<const EstimateSample> samples,
                              const std::optional<RelativePose>& pair_only_pose,
                              ScoreMode mode = ScoreMode::total, bool rotation_only = false) {
  std::vector<RelativePose> poses;
  std::vector<std::size_t> source;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].ok()) {
      poses.push_back(*samples[i].pose);
      source.push_back(i);
    }
  }
  if (poses.size() < 2) throw InsufficientSamples("video has fewer than 2 usable estimates");
  if (mode != ScoreMode::med_only && !pair_only_pose) {
    throw MissingPairBaseline("score mode needs the pair-only estimate");
  }

  const MedoidResult med = medoid(poses, rotation_only);
  VideoScore score;
  score.video_id = samples.front().video_id;
  score.mode = mode;
  score.d_med = med.d_med;
  score.medoid_index = source[med.index];
  score.medoid_pose = poses[med.index];
  if (pair_only_pose) {
    score.has_bias = true;
    score.d_bias = dist_pose(score.medoid_pose, *pair_only_pose, rotation_only).total_rad;
  }
  score.d_total = score.d_med + score.d_bias;
  return score;
}

struct ConsensusResult {
  std::string pair_id;
  Variant variant = Variant::medoid;
  std::optional<std::string> selected_video_id;
  RelativePose pose;
  std::vector<VideoScore> per_video_scores;
};

// Lowest selection key wins; ties go to the earliest video.
inline ConsensusResult select_best(std::span<const VideoScore> videos) {
  if (videos.empty()) throw NoVideos("no scored videos to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < videos.size(); ++i) {
    if (videos[i].key() < videos[best].key()) best = i;
  }
  ConsensusResult r;
  r.variant = Variant::medoid;
  r.selected_video_id = videos[best].video_id;
  r.pose = videos[best].medoid_pose;
  r.per_video_scores.assign(videos.begin(), videos.end());
  return r;
}

struct AveragedPose {
  RelativePose pose;
  bool rotation_degenerate = false;
  bool translation_degenerate = false;
};

// Chordal mean of the rotations projected back onto SO(3), and the mean of
// unit translation directions after flipping each to agree in sign with the
// first usable one. Zero-norm translations are skipped. If the rotation mean
// is rank deficient the first rotation is returned and flagged.
inline AveragedPose average_pose(std::span<const RelativePose> samples) {
  if (samples.empty()) throw NoSamples("nothing to average");
  AveragedPose out;

  Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
  for (const auto& s : samples) sum += s.rotation.matrix();
  try {
    out.pose.rotation = Rotation::project(sum / static_cast<double>(samples.size()));
  } catch (const DegenerateMatrix&) {
    out.pose.rotation = samples.front().rotation;
    out.rotation_degenerate = true;
  }

  Eigen::Vector3d reference = Eigen::Vector3d::Zero();
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  bool have_reference = false;
  for (const auto& s : samples) {
    if (!s.translation_defined()) continue;
    Eigen::Vector3d u = s.translation.normalized();
    if (!have_reference) {
      reference = u;
      have_reference = true;
    } else if (u.dot(reference) < 0.0) {
      u = -u;
    }
    acc += u;
  }
  if (!have_reference || acc.norm() < kDegenerateTranslationNorm) {
    out.pose.translation = Eigen::Vector3d::Zero();
    out.translation_degenerate = true;
  } else {
    out.pose.translation = acc.normalized();
  }
  return out;
}

// Candidate closest to ground truth by total pose distance; ties go to the
// earliest sample.
inline ConsensusResult oracle_select(std::span<const EstimateSample> samples, const RelativePose& ground_truth,
                                     bool rotation_only = false) {
  const EstimateSample* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    if (!s.ok()) continue;
    const double d = dist_pose(*s.pose, ground_truth, rotation_only).total_rad;
    if (d < best_d) {
      best_d = d;
      best = &s;
    }
  }
  if (best == nullptr) throw NoSamples("oracle has no usable candidates");
  ConsensusResult r;
  r.pair_id = best->pair_id;
  r.variant = Variant::oracle;
  r.selected_video_id = best->video_id;
  r.pose = *best->pose;
  return r;
}

}  // namespace pose_consensus
