#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cleanup/env/env_config.hpp"
#include "cleanup/env/episode_record.hpp"
#include "cleanup/net/checkpoint.hpp"
#include "cleanup/net/policy_net.hpp"
#include "cleanup/rl/a2c.hpp"

namespace cleanup::rl {

struct PopulationConfig {
  int population = 10;
  int arenas = 4;
  int group_size = kGroupSize;
  std::int64_t steps_per_agent = 2'000'000;
  int eval_groups = 2;
  int eval_episodes = 7;

  /// Desk-scale defaults above.
  static PopulationConfig desk();
  /// 120 agents, 2000 arenas, 1e8 steps per agent, 24 x 7 evaluation.
  static PopulationConfig paper();

  void validate() const;
  bool operator==(const PopulationConfig&) const = default;
};

enum class ExecutionMode { serial, threaded };

using MetricsSink = std::function<void(const nlohmann::json&)>;

struct TrainingSetup {
  PopulationConfig population;
  env::EnvConfig env = env::EnvConfig::agent_paper();
  net::NetConfig net;
  A2cHyper hyper;
  Condition condition = Condition::identifiable;
  std::uint64_t seed = 0;
  ExecutionMode mode = ExecutionMode::serial;
  int threads = 0;  // threaded mode; 0 = one per arena
  std::optional<std::filesystem::path> out_dir;  // checkpoints/ and diagnostics
  int checkpoint_every_episodes = 0;             // 0 = only at the end
  MetricsSink metrics;
};

struct TrainingResult {
  std::vector<net::Checkpoint> checkpoints;  // ordered by agent id
  std::int64_t episodes = 0;
};

/// Arena loop: each episode seats group_size distinct agents drawn uniformly
/// from those with remaining step budget (topped up from the rest when fewer
/// remain), plays with parameter snapshots, and routes segments to learners.
/// Stops once every agent has consumed its budget.
TrainingResult run_training(const TrainingSetup& setup);

struct EvaluationSetup {
  env::EnvConfig env = env::EnvConfig::agent_paper();
  Condition condition = Condition::identifiable;
  int groups = 24;
  int episodes = 7;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string preset = "agent-paper";
};

/// Partitions the checkpoints into disjoint random groups and plays each
/// group for `episodes` episodes from evaluation-start conditions without
/// learning. Records are ordered by (group, episode).
std::vector<env::EpisodeRecord> run_evaluation(const std::vector<net::Checkpoint>& checkpoints,
                                               const EvaluationSetup& setup);

/// Writes agent_<id>.ckpt for each checkpoint into `dir`.
void save_checkpoints(const std::filesystem::path& dir, const std::vector<net::Checkpoint>& checkpoints);

}  // namespace cleanup::rl
