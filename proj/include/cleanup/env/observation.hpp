#pragma once

#include <span>
#include <vector>

#include "cleanup/common/types.hpp"
#include "cleanup/env/game.hpp"
#include "cleanup/reputation/reputation.hpp"

namespace cleanup::env {

/// One-hot entity channels of an observation window.
enum ObsChannel : int {
  kSelf = 0,
  kOther0 = 1,  // identifiable: one channel per peer slot (1..4); anonymous: all peers here
  kApple = 5,
  kPollution = 6,
  kWall = 7,  // includes cells beyond the map border
  kRiver = 8,
  kGround = 9,  // walkable non-river cells (ground, orchard, spawn)
};
inline constexpr int kObsChannels = 10;
inline constexpr int kMaxPeerSlots = 4;

struct Observation {
  int size = 0;                        // window side length (odd)
  std::vector<float> planes;           // [channel][row][col]
  std::vector<float> contributions;    // observer-first smoothed traces
  Condition condition = Condition::identifiable;

  float at(int channel, int row, int col) const {
    return planes[static_cast<std::size_t>((channel * size + row) * size + col)];
  }
  bool operator==(const Observation&) const = default;
};

/// Map position seen at window cell (row, col) by `viewer`.
Pos window_to_world(const Avatar& viewer, int size, int row, int col, bool rotate);

/// Egocentric window of side config.obs_window centred on `player`. When the
/// config asks for rotation the window is turned so the avatar faces up.
Observation render_observation(const CleanupGame& game, const WorldState& state, int player,
                               Condition condition, const reputation::ContributionTracker& tracker);

/// Allocation-free variant writing kObsChannels * size * size floats.
void render_planes(const CleanupGame& game, const WorldState& state, int player, Condition condition,
                   std::span<float> out);

}  // namespace cleanup::env
