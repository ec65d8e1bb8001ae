#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cleanup/env/game.hpp"

namespace cleanup::server {

enum class GoalKind { reach, collect_apples, clean_cells, issue_ticket, receive_ticket };

enum class PartnerKind { none, idle, ticketer };

struct Tutorial {
  int index = 0;  // 1-based
  std::string topic;
  std::string text;
  GoalKind goal = GoalKind::reach;
  int count = 1;
  Pos target;  // reach goal
  int max_steps = 600;
  PartnerKind partner = PartnerKind::none;
  env::EnvConfig config;
  std::shared_ptr<const env::GridMap> map;

  nlohmann::json goal_json() const;
};

/// Reads tutorials.json and its map files from `dir`. Each tutorial config
/// starts from `base` (the session preset) with the listed overrides.
std::vector<Tutorial> load_tutorials(const std::filesystem::path& dir, const env::EnvConfig& base);

/// The six shipped tutorials under the data directory.
std::vector<Tutorial> default_tutorials(const env::EnvConfig& base);

std::filesystem::path data_dir();

/// One participant working through one tutorial. The participant is
/// player 0; a scripted partner, if any, is player 1.
class TutorialRun {
 public:
  TutorialRun(const Tutorial& tutorial, std::uint64_t seed);

  void step(env::Action action);

  bool goal_met() const { return progress_ >= tutorial_->count; }
  bool finished() const { return goal_met() || game_.done(state_); }
  int progress() const { return progress_; }
  double score() const { return score_; }

  const env::CleanupGame& game() const { return game_; }
  const env::WorldState& state() const { return state_; }
  const Tutorial& tutorial() const { return *tutorial_; }

 private:
  env::Action partner_action() const;

  const Tutorial* tutorial_;
  env::CleanupGame game_;
  env::WorldState state_;
  int progress_ = 0;
  double score_ = 0.0;
};

}  // namespace cleanup::server
