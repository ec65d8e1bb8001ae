#include "cleanup/server/frame.hpp"

#include "cleanup/common/errors.hpp"
#include "cleanup/env/observation.hpp"

namespace cleanup::server {

using nlohmann::json;

std::vector<std::string> render_tiles(const env::CleanupGame& game, const env::WorldState& state, int viewer,
                                      Condition condition, int size) {
  const auto& map = game.map();
  const auto& me = state.avatars.at(static_cast<std::size_t>(viewer));
  std::vector<std::string> rows(static_cast<std::size_t>(size), std::string(static_cast<std::size_t>(size), '#'));
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const Pos p = env::window_to_world(me, size, r, c, false);
      if (!map.in_bounds(p)) continue;
      char g = env::cell_glyph(map.at(p));
      if (const int s = map.river_slot(p); s >= 0) g = state.polluted[static_cast<std::size_t>(s)] ? '~' : 'R';
      if (const int s = map.orchard_slot(p); s >= 0) g = state.apples[static_cast<std::size_t>(s)] ? 'a' : 'O';
      if (g == 'P') g = '.';
      rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = g;
    }
  }
  int peer = 0;
  for (std::size_t i = 0; i < state.avatars.size(); ++i) {
    const bool self = static_cast<int>(i) == viewer;
    const char g = self ? '@' : (condition == Condition::identifiable ? static_cast<char>('1' + peer) : 'L');
    if (!self) ++peer;
    const Pos d{state.avatars[i].pos.x - me.pos.x, state.avatars[i].pos.y - me.pos.y};
    const int half = size / 2;
    if (std::abs(d.x) > half || std::abs(d.y) > half) continue;
    rows[static_cast<std::size_t>(d.y + half)][static_cast<std::size_t>(d.x + half)] = g;
  }
  return rows;
}

json tile_delta(const std::vector<std::string>& before, const std::vector<std::string>& after) {
  if (before.size() != after.size()) throw ConfigError("tile_delta: shape mismatch");
  json d = json::array();
  for (std::size_t r = 0; r < after.size(); ++r) {
    if (before[r].size() != after[r].size()) throw ConfigError("tile_delta: shape mismatch");
    for (std::size_t c = 0; c < after[r].size(); ++c) {
      if (before[r][c] != after[r][c]) d.push_back({r, c, std::string(1, after[r][c])});
    }
  }
  return d;
}

json hud_json(const Hud& hud, Condition condition) {
  json h = {{"episode_earnings", hud.episode_earnings},
            {"cumulative_earnings", hud.cumulative_earnings},
            {"tickets", hud.tickets ? json(*hud.tickets) : json(nullptr)},
            {"own_contribution", hud.own_contribution}};
  if (condition == Condition::identifiable) h["peer_contributions"] = hud.peer_contributions;
  return h;
}

}  // namespace cleanup::server
