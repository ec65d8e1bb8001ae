#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cleanup/common/types.hpp"
#include "cleanup/env/game.hpp"

namespace cleanup::env {

struct PlayerStep {
  Pos pos;  // after the step
  Orientation facing = Orientation::north;
  Action action = Action::noop;
  double reward = 0.0;  // extrinsic
  std::uint8_t contributed = 0;
  std::uint8_t apples = 0;  // apples collected this step
  bool operator==(const PlayerStep&) const = default;
};

struct StepRecord {
  std::vector<PlayerStep> players;
  double polluted_fraction = 0.0;  // after the step
  std::uint64_t digest = 0;        // CleanupGame::digest after the step
  std::vector<double> intrinsic;   // optional per-player intrinsic reward
  bool operator==(const StepRecord&) const = default;
};

/// Immutable log of one episode, sufficient to replay it exactly.
struct EpisodeRecord {
  static constexpr int kSchemaMajor = 1;
  static constexpr int kSchemaMinor = 0;

  EnvConfig config;
  std::string preset;  // agent-paper, human-paper or custom
  std::uint64_t config_digest = 0;
  std::string map_text;
  std::uint64_t seed = 0;
  Condition condition = Condition::identifiable;
  int group_id = 0;
  int episode_index = 0;
  int task_index = 0;  // 1 or 2 for counterbalanced human sessions, 0 otherwise
  std::string session_id;
  std::vector<std::string> player_ids;
  std::vector<Pos> initial_positions;
  std::uint64_t initial_digest = 0;
  std::vector<StepRecord> steps;
  std::uint64_t final_digest = 0;

  int players() const { return static_cast<int>(player_ids.size()); }
  bool operator==(const EpisodeRecord&) const = default;
};

/// Accumulates an EpisodeRecord while an episode is played.
class EpisodeRecorder {
 public:
  EpisodeRecorder(const CleanupGame& game, const WorldState& initial, std::uint64_t seed, Condition condition,
                  std::vector<std::string> player_ids, std::string preset = "custom");

  EpisodeRecord& header() { return record_; }

  void record(const WorldState& after, std::span<const Action> actions, const StepEvents& events,
              std::span<const double> intrinsic = {});

  EpisodeRecord finish();

 private:
  const CleanupGame& game_;
  EpisodeRecord record_;
};

/// Per-player sums over a record.
struct EpisodeTotals {
  std::vector<double> extrinsic;
  std::vector<int> contribution_steps;
  std::vector<int> apples;
  std::vector<double> intrinsic;
};

EpisodeTotals totals(const EpisodeRecord& record);

}  // namespace cleanup::env
