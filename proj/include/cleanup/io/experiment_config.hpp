#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cleanup/common/types.hpp"
#include "cleanup/env/env_config.hpp"
#include "cleanup/net/policy_net.hpp"
#include "cleanup/rl/a2c.hpp"
#include "cleanup/rl/population.hpp"
#include "cleanup/stats/anova.hpp"

namespace cleanup::io {

struct AnalysisOptions {
  int consistency_bins = 10;
  int turn_min_duration = 0;  // 0 = every river entry is a turn
  bool first_appearance_zero = false;
  int bootstrap_resamples = 10000;
  stats::AnovaVariant anova_variant = stats::AnovaVariant::episode_replicate;
  bool operator==(const AnalysisOptions&) const = default;
};

struct TrainingOptions {
  rl::A2cHyper hyper;
  rl::ExecutionMode mode = rl::ExecutionMode::serial;
  int threads = 0;
  int checkpoint_every_episodes = 0;
  bool operator==(const TrainingOptions&) const = default;
};

struct ExperimentConfig {
  std::string preset = "agent-paper";  // agent-paper, human-paper or custom
  env::EnvConfig env = env::EnvConfig::agent_paper();
  std::vector<Condition> conditions = {Condition::identifiable, Condition::anonymous};
  std::uint64_t seed = 0;
  rl::PopulationConfig population = rl::PopulationConfig::desk();
  net::NetConfig net;
  TrainingOptions training;
  AnalysisOptions analysis;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Named environment parameter set; throws ConfigError for unknown names.
env::EnvConfig env_preset(const std::string& name);

nlohmann::json to_json(const env::EnvConfig& c);
env::EnvConfig env_config_from_json(const nlohmann::json& j, env::EnvConfig base = {});

nlohmann::json to_json(const ExperimentConfig& c);
/// Rejects unknown fields (naming their path) and out-of-range values.
ExperimentConfig config_from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& c);

std::string to_string(stats::AnovaVariant v);
stats::AnovaVariant parse_anova_variant(const std::string& s);

}  // namespace cleanup::io
