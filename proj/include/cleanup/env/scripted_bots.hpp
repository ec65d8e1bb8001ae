#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cleanup/common/rng.hpp"
#include "cleanup/env/episode_record.hpp"
#include "cleanup/env/game.hpp"

namespace cleanup::env {

enum class BotKind : std::uint8_t {
  cooperator,  // cleans the river while it is dirty, harvests otherwise
  defector,    // harvests only
  random,
  idle,
};

std::string_view to_string(BotKind k);

/// Hand-written policy with full-state access, used for corpus generation,
/// tutorials and tests.
class ScriptedBot {
 public:
  ScriptedBot(BotKind kind, const CleanupGame& game, int player, std::uint64_t seed);

  Action act(const WorldState& state);

  BotKind kind() const { return kind_; }

 private:
  Action clean(const WorldState& state);
  Action harvest(const WorldState& state);
  Action step_toward(const WorldState& state, const std::vector<int>& distance);
  std::vector<int> distance_field(const std::vector<Pos>& targets) const;

  BotKind kind_;
  const CleanupGame* game_;
  int player_;
  Rng rng_;
  bool cleaning_ = false;
  double clean_start_;
  double clean_stop_;
};

/// Egocentric move action that steps the avatar in absolute direction `dir`.
Action move_toward(Orientation facing, Pos dir);

/// Plays one episode with a scripted bot in every seat and records it.
/// Bot seeds derive from `seed`, so the record depends on nothing else.
EpisodeRecord play_scripted(const CleanupGame& game, std::span<const BotKind> kinds, std::uint64_t seed,
                            Condition condition, std::string preset = "custom");

enum class BotMix { mixed, cooperators, defectors };

/// "mixed", "cooperators" or "defectors".
BotMix parse_bot_mix(std::string_view s);

/// Cooperator/defector episodes. Under `mixed` each episode draws its
/// cooperator count uniformly from 0..N and shuffles the seats. Episode e
/// gets group_id e.
std::vector<EpisodeRecord> scripted_corpus(const CleanupGame& game, int episodes, std::uint64_t seed,
                                           Condition condition, BotMix mix, const std::string& preset = "custom");

}  // namespace cleanup::env
