#pragma once

// Frame-subset plans for a generated video. A subset always pairs the two
// original input images with g = k - 2 interior frames of the video; the
// video's endpoint frames (1 and N) are never sampled because they replicate
// the inputs.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "pose_consensus/counter_rng.hpp"
#include "pose_consensus/error.hpp"
#include "pose_consensus/records.hpp"

namespace pose_consensus {

struct SamplingPlan {
  int k = 5;  // images per subset, anchors included
  int m_random = 10;
  bool include_uniform = true;
  std::uint64_t seed = 0;

  int interior_count() const { return k - 2; }
  int total_subsets() const { return m_random + (include_uniform ? 1 : 0); }

  void validate() const {
    if (k < 2) throw InvalidPlan("k must be at least 2");
    if (m_random < 0) throw InvalidPlan("m_random must be non-negative");
    if (total_subsets() < 1) throw InvalidPlan("plan produces no subsets");
  }
};

// Interior frame indices (1-based, strictly increasing, each in [2, N-1]).
// The anchors I_A, I_B are implied and always come first in a request.
struct FrameSubset {
  std::vector<int> interior_indices;

  bool operator==(const FrameSubset&) const = default;
};

namespace detail {

inline void require_frames(int n_frames, int g) {
  if (g < 0) throw InvalidPlan("interior count must be non-negative");
  if (n_frames < g + 2) {
    throw VideoTooShort("video has " + std::to_string(n_frames) + " frames, need at least " +
                        std::to_string(g + 2));
  }
}

}  // namespace detail

// g interior frames at positions round(1 + j (N - 1) / (g + 1)), j = 1..g,
// rounded half away from zero in exact integer arithmetic. Positions are at
// least one frame apart whenever N >= g + 2, so the clamp and the shift-right
// collision rule are never binding for valid input.
inline FrameSubset uniform_subset(int n_frames, int g) {
  detail::require_frames(n_frames, g);
  FrameSubset subset;
  subset.interior_indices.reserve(static_cast<std::size_t>(g));
  const std::int64_t den = g + 1;
  int next_free = 2;
  for (std::int64_t j = 1; j <= g; ++j) {
    const std::int64_t num = den + j * (n_frames - 1);  // (1 + j (N-1)/(g+1)) * den
    int idx = static_cast<int>((2 * num + den) / (2 * den));
    idx = std::clamp(idx, 2, n_frames - 1);
    idx = std::max(idx, next_free);  // collision: shift right
    subset.interior_indices.push_back(idx);
    next_free = idx + 1;
  }
  return subset;
}

// count_m subsets of g distinct interior frames drawn uniformly without
// replacement. Draw o uses counter lane (seed, stream, o) only.
inline std::vector<FrameSubset> random_subsets(int n_frames, int g, int count_m, std::uint64_t seed,
                                               std::uint64_t stream) {
  detail::require_frames(n_frames, g);
  std::vector<FrameSubset> out;
  out.reserve(static_cast<std::size_t>(std::max(count_m, 0)));
  const int pool_size = n_frames - 2;
  std::vector<int> pool(static_cast<std::size_t>(pool_size));
  for (int ordinal = 0; ordinal < count_m; ++ordinal) {
    std::iota(pool.begin(), pool.end(), 2);
    CounterRng rng(seed, stream, static_cast<std::uint32_t>(ordinal));
    for (int i = 0; i < g; ++i) {
      const auto pick = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(pool_size - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick)]);
    }
    FrameSubset s{std::vector<int>(pool.begin(), pool.begin() + g)};
    std::sort(s.interior_indices.begin(), s.interior_indices.end());
    out.push_back(std::move(s));
  }
  return out;
}

inline std::uint64_t plan_stream(const std::string& pair_id, const std::string& video_id) {
  return stream_key(pair_id, video_id);
}

// Uniform subset first (when enabled), then random subsets by ordinal.
inline std::vector<FrameSubset> build_plan(const std::string& pair_id, const VideoRecord& video,
                                           const SamplingPlan& plan) {
  plan.validate();
  const int g = plan.interior_count();
  detail::require_frames(video.frame_count(), g);
  std::vector<FrameSubset> subsets;
  subsets.reserve(static_cast<std::size_t>(plan.total_subsets()));
  if (plan.include_uniform) subsets.push_back(uniform_subset(video.frame_count(), g));
  auto random = random_subsets(video.frame_count(), g, plan.m_random, plan.seed,
                               plan_stream(pair_id, video.video_id));
  subsets.insert(subsets.end(), std::make_move_iterator(random.begin()),
                 std::make_move_iterator(random.end()));
  return subsets;
}

}  // namespace pose_consensus
