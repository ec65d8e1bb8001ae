#include "cleanup/server/tutorials.hpp"

#include <array>
#include <fstream>

#include "cleanup/common/errors.hpp"
#include "cleanup/env/scripted_bots.hpp"
#include "cleanup/io/experiment_config.hpp"

#ifndef CLEANUP_DATA_DIR
#define CLEANUP_DATA_DIR "data"
#endif

namespace cleanup::server {

using nlohmann::json;

namespace {

GoalKind parse_goal(const std::string& s) {
  if (s == "reach") return GoalKind::reach;
  if (s == "collect_apples") return GoalKind::collect_apples;
  if (s == "clean_cells") return GoalKind::clean_cells;
  if (s == "issue_ticket") return GoalKind::issue_ticket;
  if (s == "receive_ticket") return GoalKind::receive_ticket;
  throw ConfigError("tutorials: unknown goal kind '" + s + "'");
}

const char* goal_name(GoalKind g) {
  switch (g) {
    case GoalKind::reach: return "reach";
    case GoalKind::collect_apples: return "collect_apples";
    case GoalKind::clean_cells: return "clean_cells";
    case GoalKind::issue_ticket: return "issue_ticket";
    case GoalKind::receive_ticket: return "receive_ticket";
  }
  return "reach";
}

PartnerKind parse_partner(const std::string& s) {
  if (s == "none") return PartnerKind::none;
  if (s == "idle") return PartnerKind::idle;
  if (s == "ticketer") return PartnerKind::ticketer;
  throw ConfigError("tutorials: unknown partner '" + s + "'");
}

}  // namespace

json Tutorial::goal_json() const {
  json g = {{"kind", goal_name(goal)}, {"count", count}};
  if (goal == GoalKind::reach) g["target"] = {target.x, target.y};
  return g;
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("CLEANUP_DATA_DIR")) return env;
  return CLEANUP_DATA_DIR;
}

std::vector<Tutorial> load_tutorials(const std::filesystem::path& dir, const env::EnvConfig& base) {
  std::ifstream in(dir / "tutorials.json");
  if (!in) throw ConfigError("tutorials: cannot open " + (dir / "tutorials.json").string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("tutorials: ") + e.what());
  }
  std::vector<Tutorial> out;
  try {
    for (const auto& t : j.at("tutorials")) {
      Tutorial tut;
      tut.index = static_cast<int>(out.size()) + 1;
      tut.topic = t.at("topic").get<std::string>();
      tut.text = t.value("text", "");
      tut.max_steps = t.value("max_steps", 600);
      const int players = t.value("players", 1);
      tut.partner = parse_partner(t.value("partner", players > 1 ? "idle" : "none"));
      if ((tut.partner == PartnerKind::none) != (players == 1) || players > 2) {
        throw ConfigError("tutorials: '" + tut.topic + "' needs one player, or two with a partner");
      }
      const auto& g = t.at("goal");
      tut.goal = parse_goal(g.at("kind").get<std::string>());
      tut.count = g.value("count", 1);
      if (tut.goal == GoalKind::reach) tut.target = {g.at("x").get<int>(), g.at("y").get<int>()};
      env::EnvConfig cfg = base;
      cfg.num_players = players;
      cfg.episode_length = tut.max_steps;
      cfg.ticket_budget.reset();
      tut.config = t.contains("env") ? io::env_config_from_json(t.at("env"), cfg) : cfg;
      tut.config.validate();
      tut.map = std::make_shared<const env::GridMap>(
          env::GridMap::load(dir / t.at("map").get<std::string>(), players));
      if (tut.goal == GoalKind::reach && !tut.map->walkable(tut.target)) {
        throw ConfigError("tutorials: goal cell of '" + tut.topic + "' is not walkable");
      }
      out.push_back(std::move(tut));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("tutorials: ") + e.what());
  }
  if (out.empty()) throw ConfigError("tutorials: none defined");
  return out;
}

std::vector<Tutorial> default_tutorials(const env::EnvConfig& base) {
  return load_tutorials(data_dir() / "tutorials", base);
}

TutorialRun::TutorialRun(const Tutorial& tutorial, std::uint64_t seed)
    : tutorial_(&tutorial), game_(tutorial.config, tutorial.map), state_(game_.reset(seed)) {}

env::Action TutorialRun::partner_action() const {
  if (tutorial_->partner != PartnerKind::ticketer) return env::Action::noop;
  const auto& me = state_.avatars[1];
  const Pos target = state_.avatars[0].pos;
  for (const Pos p : game_.beam_footprint(me.pos, me.facing)) {
    if (p == target) return env::Action::fire_ticket;
  }
  const Pos d{target.x - me.pos.x, target.y - me.pos.y};
  if (chebyshev(me.pos, target) <= 1) return env::Action::rotate_right;
  const Pos dir = std::abs(d.x) >= std::abs(d.y) ? Pos{d.x > 0 ? 1 : -1, 0} : Pos{0, d.y > 0 ? 1 : -1};
  return env::move_toward(me.facing, dir);
}

void TutorialRun::step(env::Action action) {
  if (finished()) throw StateError("tutorial already finished");
  std::vector<env::Action> actions{action};
  if (tutorial_->partner != PartnerKind::none) actions.push_back(partner_action());
  const auto ev = game_.step(state_, actions);
  const auto& me = ev.players[0];
  score_ += me.reward;
  switch (tutorial_->goal) {
    case GoalKind::reach: progress_ = state_.avatars[0].pos == tutorial_->target ? tutorial_->count : 0; break;
    case GoalKind::collect_apples: progress_ += me.apples_collected; break;
    case GoalKind::clean_cells: progress_ += me.cleaned_cells; break;
    case GoalKind::issue_ticket: progress_ += me.tickets_issued; break;
    case GoalKind::receive_ticket: progress_ += me.tickets_received; break;
  }
}

}  // namespace cleanup::server
