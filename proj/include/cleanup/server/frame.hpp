#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cleanup/env/game.hpp"

namespace cleanup::server {

/// North-up window of side `size` centred on `viewer`, one glyph per cell
/// (see protocol.hpp for the glyph table).
std::vector<std::string> render_tiles(const env::CleanupGame& game, const env::WorldState& state, int viewer,
                                      Condition condition, int size);

/// [[row, col, glyph], ...] for every cell that differs. Shapes must match.
nlohmann::json tile_delta(const std::vector<std::string>& before, const std::vector<std::string>& after);

struct Hud {
  double episode_earnings = 0.0;
  double cumulative_earnings = 0.0;
  std::optional<int> tickets;  // nullopt = unlimited
  double own_contribution = 0.0;
  std::vector<double> peer_contributions;  // identifiable only, peer slot order
};

/// Anonymous HUDs never carry peer contribution values, whatever `hud` holds.
nlohmann::json hud_json(const Hud& hud, Condition condition);

}  // namespace cleanup::server
