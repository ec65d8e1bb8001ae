#pragma once

#include <compare>
#include <cstdint>
#include <vector>

namespace cleanup::rl {

/// Globally unique segment identity; learners apply each id at most once.
struct SegmentId {
  std::uint64_t arena = 0;
  std::uint64_t episode = 0;
  int agent = 0;
  int index = 0;
  auto operator<=>(const SegmentId&) const = default;
};

/// Up to segment_length contiguous steps of one agent in one episode.
struct Trajectory {
  SegmentId id;
  int agent = 0;
  int length = 0;  // valid steps; shorter than segment_length only at episode end
  std::vector<float> observations;     // length x obs_dim
  std::vector<float> scalars;          // length x scalar_dim
  std::vector<int> actions;            // length
  std::vector<float> behavior_logits;  // length x action_count, recorded when acting
  std::vector<float> rewards;          // combined reward
  std::vector<float> extrinsic;
  std::vector<float> intrinsic;
  std::vector<float> initial_hidden;   // recurrent state at segment start
  std::vector<float> initial_cell;
  std::vector<float> bootstrap_observation;  // observation after the last step
  std::vector<float> bootstrap_scalars;
  bool terminal = false;  // episode ended with this segment; bootstrap value is 0
};

}  // namespace cleanup::rl
