#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cleanup/common/rng.hpp"
#include "cleanup/common/types.hpp"
#include "cleanup/env/env_config.hpp"
#include "cleanup/env/grid_map.hpp"

namespace cleanup::env {

enum class Action : std::uint8_t {
  move_up,  // forward, relative to facing
  move_down,
  move_left,
  move_right,
  rotate_left,
  rotate_right,
  fire_clean,
  fire_ticket,
  noop,
};

inline constexpr int kNumActions = 9;

std::string_view to_string(Action a);
Action action_from_index(int index);  // throws ConfigError outside [0, 9)

enum class Orientation : std::uint8_t { north, east, south, west };

/// Unit vector for a facing direction (north is -y).
Pos heading(Orientation o);
Orientation rotate_left(Orientation o);
Orientation rotate_right(Orientation o);

struct Avatar {
  Pos pos;
  Orientation facing = Orientation::north;
  double score = 0.0;
  std::optional<int> tickets_remaining;  // nullopt = unlimited

  bool operator==(const Avatar&) const = default;
};

/// Complete mutable state of one arena. Pollution and apples are stored as
/// flags indexed by GridMap::river_cells() / orchard_cells().
struct WorldState {
  int t = 0;
  std::vector<std::uint8_t> polluted;
  std::vector<std::uint8_t> apples;
  int polluted_count = 0;
  int apple_count = 0;
  std::vector<Avatar> avatars;
  Rng rng;

  bool operator==(const WorldState&) const = default;
};

struct PlayerEvents {
  double reward = 0.0;  // extrinsic
  int cleaned_cells = 0;
  int apples_collected = 0;
  int tickets_issued = 0;
  int tickets_received = 0;
  std::uint8_t contributed = 0;  // 1 iff cleaned_cells >= 1
};

struct StepEvents {
  std::vector<PlayerEvents> players;
};

/// Deterministic Cleanup rules over a fixed map and configuration.
///
/// A step resolves, in order: rotations; moves in a seeded random priority
/// order (walls and occupied cells block, so a contested cell goes to the
/// mover with the higher priority); beams in the same priority order;
/// apple pickup by avatars that moved; one pollution spawn trial; per-cell
/// apple regrowth. Both probabilities use the polluted fraction measured
/// after cleaning.
class CleanupGame {
 public:
  CleanupGame(EnvConfig config, std::shared_ptr<const GridMap> map);

  const EnvConfig& config() const { return config_; }
  const GridMap& map() const { return *map_; }
  std::shared_ptr<const GridMap> map_ptr() const { return map_; }

  WorldState reset(std::uint64_t seed) const;

  /// Throws StateError once the episode is over, ConfigError on wrong arity.
  StepEvents step(WorldState& state, std::span<const Action> actions) const;

  bool done(const WorldState& state) const { return state.t >= config_.episode_length; }

  double polluted_fraction(const WorldState& state) const;

  /// Cells covered by a beam fired from `origin` facing `facing`, nearest
  /// first within each lane, centre lane first. Lanes stop at walls.
  std::vector<Pos> beam_footprint(Pos origin, Orientation facing) const;

  /// Hash of everything but the RNG; recorded per step for replay checks.
  std::uint64_t digest(const WorldState& state) const;

  // Individual environment phases, exposed for statistical tests.
  bool spawn_pollution(WorldState& state, double polluted_fraction) const;
  int regrow_apples(WorldState& state, double polluted_fraction) const;

 private:
  EnvConfig config_;
  std::shared_ptr<const GridMap> map_;
};

}  // namespace cleanup::env
