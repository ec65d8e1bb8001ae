#include "cleanup/env/observation.hpp"

#include <algorithm>

#include "cleanup/common/errors.hpp"

namespace cleanup::env {

Pos window_to_world(const Avatar& viewer, int size, int row, int col, bool rotate) {
  const int half = size / 2;
  const int forward = half - row;
  const int right = col - half;
  const Orientation facing = rotate ? viewer.facing : Orientation::north;
  const Pos f = heading(facing);
  const Pos r = heading(rotate_right(facing));
  return {viewer.pos.x + forward * f.x + right * r.x, viewer.pos.y + forward * f.y + right * r.y};
}

void render_planes(const CleanupGame& game, const WorldState& state, int player, Condition condition,
                   std::span<float> out) {
  const auto& cfg = game.config();
  const auto& map = game.map();
  const int size = cfg.obs_window;
  const auto plane = static_cast<std::size_t>(size * size);
  if (out.size() != kObsChannels * plane) throw ConfigError("render: output buffer has wrong size");
  if (player < 0 || player >= static_cast<int>(state.avatars.size())) {
    throw ConfigError("render: player index out of range");
  }
  std::fill(out.begin(), out.end(), 0.0f);

  // Peer slot for each avatar index (observer excluded).
  std::vector<int> channel_of(state.avatars.size(), -1);
  int slot = 0;
  for (std::size_t j = 0; j < state.avatars.size(); ++j) {
    if (static_cast<int>(j) == player) {
      channel_of[j] = kSelf;
    } else {
      channel_of[j] = condition == Condition::identifiable ? kOther0 + std::min(slot, kMaxPeerSlots - 1) : kOther0;
      ++slot;
    }
  }
  std::vector<int> occupant(static_cast<std::size_t>(map.cell_count()), -1);
  for (std::size_t j = 0; j < state.avatars.size(); ++j) {
    occupant[static_cast<std::size_t>(map.index(state.avatars[j].pos))] = static_cast<int>(j);
  }

  const Avatar& viewer = state.avatars[static_cast<std::size_t>(player)];
  for (int row = 0; row < size; ++row) {
    for (int col = 0; col < size; ++col) {
      const auto cell = static_cast<std::size_t>(row * size + col);
      auto set = [&](int channel) { out[static_cast<std::size_t>(channel) * plane + cell] = 1.0f; };
      const Pos p = window_to_world(viewer, size, row, col, cfg.egocentric_rotation);
      if (!map.in_bounds(p)) {
        set(kWall);
        continue;
      }
      switch (map.at(p)) {
        case Cell::wall: set(kWall); break;
        case Cell::river: set(kRiver); break;
        default: set(kGround); break;
      }
      if (const int rs = map.river_slot(p); rs >= 0 && state.polluted[static_cast<std::size_t>(rs)]) set(kPollution);
      if (const int os = map.orchard_slot(p); os >= 0 && state.apples[static_cast<std::size_t>(os)]) set(kApple);
      if (const int who = occupant[static_cast<std::size_t>(map.index(p))]; who >= 0) {
        set(channel_of[static_cast<std::size_t>(who)]);
      }
    }
  }
}

Observation render_observation(const CleanupGame& game, const WorldState& state, int player,
                               Condition condition, const reputation::ContributionTracker& tracker) {
  Observation obs;
  obs.size = game.config().obs_window;
  obs.condition = condition;
  obs.planes.resize(static_cast<std::size_t>(kObsChannels * obs.size * obs.size));
  render_planes(game, state, player, condition, obs.planes);
  obs.contributions = tracker.observer_view(player);
  return obs;
}

}  // namespace cleanup::env
