#pragma once

#include <string>
#include <vector>

namespace pose_consensus {

// Which input image the generated video starts from.
enum class Direction { ab, ba };

inline const char* to_string(Direction d) { return d == Direction::ab ? "ab" : "ba"; }

// One generated interpolation video. frames[0] and frames.back() replicate
// the two input images; everything in between is an interior frame.
struct VideoRecord {
  std::string video_id;
  std::string generator;
  std::string prompt_id;
  Direction direction = Direction::ab;
  std::vector<std::string> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }

  // 1-based frame index to reference.
  const std::string& frame(int index) const { return frames.at(static_cast<std::size_t>(index - 1)); }
};

}  // namespace pose_consensus
