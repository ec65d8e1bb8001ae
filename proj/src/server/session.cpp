#include "cleanup/server/session.hpp"

#include <numeric>

#include "cleanup/common/digest.hpp"
#include "cleanup/common/errors.hpp"
#include "cleanup/server/frame.hpp"
#include "cleanup/server/protocol.hpp"

namespace cleanup::server {

using nlohmann::json;

std::string_view to_string(ConditionOrder o) {
  return o == ConditionOrder::identifiable_first ? "identifiable-first" : "anonymous-first";
}

std::optional<ConditionOrder> parse_order(std::string_view s) {
  if (s == "auto") return std::nullopt;
  if (s == "identifiable-first") return ConditionOrder::identifiable_first;
  if (s == "anonymous-first") return ConditionOrder::anonymous_first;
  throw ConfigError("unknown condition order '" + std::string(s) + "'");
}

ConditionOrder OrderAssigner::next() {
  if (fixed_) return *fixed_;
  return issued_++ % 2 == 0 ? ConditionOrder::identifiable_first : ConditionOrder::anonymous_first;
}

void SessionConfig::validate() const {
  env.validate();
  if (env.num_players != kGroupSize) throw ConfigError("session: env must have 5 players");
  if (!map) throw ConfigError("session: no map");
  if (episodes_per_condition < 1) throw ConfigError("session: episodes_per_condition must be >= 1");
  if (tick.count() <= 0) throw ConfigError("session: tick must be positive");
  if (input_window.count() < 0 || reconnect_window.count() < 0 || between_phases.count() < 0) {
    throw ConfigError("session: durations must be non-negative");
  }
}

json ScoreSummary::to_json() const {
  json eps = json::array();
  for (const auto& e : episodes) {
    eps.push_back({{"episode", e.episode}, {"condition", std::string(cleanup::to_string(e.condition))}, {"scores", e.scores}});
  }
  return {{"participants", participants}, {"cumulative", cumulative}, {"episodes", eps}};
}

Session::Session(SessionConfig config, ConditionOrder order)
    : config_(std::move(config)),
      order_(order),
      slots_(static_cast<std::size_t>(kGroupSize)),
      inputs_(kGroupSize, config_.input_window),
      token_rng_(derive_seed(config_.seed, "token")) {
  config_.validate();
}

int Session::connected_count() const {
  return static_cast<int>(std::count_if(slots_.begin(), slots_.end(), [](const Slot& s) { return s.connected; }));
}

Condition Session::condition_of(int episode) const {
  const bool first = episode < config_.episodes_per_condition;
  const bool ident_first = order_ == ConditionOrder::identifiable_first;
  return first == ident_first ? Condition::identifiable : Condition::anonymous;
}

std::string Session::new_token(int slot) {
  return to_hex(token_rng_.next_u64()) + to_hex(mix_seed(static_cast<std::uint64_t>(slot) + token_rng_.next_u64()));
}

void Session::broadcast(const json& m, std::vector<Outbound>& out) const {
  for (int i = 0; i < kGroupSize; ++i) {
    if (slots_[static_cast<std::size_t>(i)].connected) out.push_back({i, m});
  }
}

std::optional<int> Session::join(const std::optional<std::string>& token, Millis now, std::vector<Outbound>& out) {
  if (done()) return std::nullopt;
  const auto lobby_message = [&](int slot) {
    return make_message(MessageType::lobby_state, {{"session_id", config_.session_id},
                                                   {"slot", slot},
                                                   {"token", slots_[static_cast<std::size_t>(slot)].token},
                                                   {"connected", connected_count()},
                                                   {"needed", kGroupSize}});
  };
  if (token) {
    for (int i = 0; i < kGroupSize; ++i) {
      auto& s = slots_[static_cast<std::size_t>(i)];
      if (!s.taken || s.token != *token) continue;
      if (s.connected) return std::nullopt;
      s.connected = true;
      s.need_keyframe = true;
      out.push_back({i, lobby_message(i)});
      if (state_ == State::paused && connected_count() == kGroupSize) {
        const Millis gap = now - paused_at_;
        state_ = resume_state_;
        next_tick_ += gap;
        phase_started_ += gap;
        broadcast(make_message(MessageType::resumed), out);
      }
      const bool active = state_ == State::episode || (state_ == State::tutorials && s.run);
      if (active || (state_ == State::paused && (resume_state_ == State::episode || s.run))) {
        out.push_back({i, phase_start_message(i)});
        send_frame(i, out);
      }
      return i;
    }
    return std::nullopt;
  }
  if (state_ != State::lobby) return std::nullopt;
  for (int i = 0; i < kGroupSize; ++i) {
    auto& s = slots_[static_cast<std::size_t>(i)];
    if (s.taken) continue;
    s.taken = true;
    s.connected = true;
    s.token = new_token(i);
    s.participant_id = config_.session_id + "/p" + std::to_string(i);
    for (int j = 0; j < kGroupSize; ++j) {
      if (slots_[static_cast<std::size_t>(j)].connected) out.push_back({j, lobby_message(j)});
    }
    if (connected_count() == kGroupSize) {
      if (config_.tutorials.empty()) {
        state_ = State::between;
        next_tick_ = now;
        advance(now, out);
      } else {
        start_tutorials(now, out);
      }
    }
    return i;
  }
  return std::nullopt;
}

void Session::disconnect(int slot, Millis now, std::vector<Outbound>& out) {
  auto& s = slots_.at(static_cast<std::size_t>(slot));
  if (!s.connected) return;
  s.connected = false;
  if (state_ == State::lobby) {
    s = Slot{};
    for (int j = 0; j < kGroupSize; ++j) {
      const auto& o = slots_[static_cast<std::size_t>(j)];
      if (!o.connected) continue;
      out.push_back({j, make_message(MessageType::lobby_state, {{"session_id", config_.session_id},
                                                                {"slot", j},
                                                                {"token", o.token},
                                                                {"connected", connected_count()},
                                                                {"needed", kGroupSize}})});
    }
    return;
  }
  if (done()) return;
  if (state_ != State::paused) {
    resume_state_ = state_;
    state_ = State::paused;
    paused_at_ = now;
    resume_deadline_ = now + config_.reconnect_window;
    inputs_.clear();
  }
  broadcast(make_message(MessageType::paused, {{"reason", "participant " + std::to_string(slot) + " disconnected"},
                                               {"resume_deadline_ms", resume_deadline_.count()}}),
            out);
}

InputDecision Session::input(int slot, int action_id, Millis now) {
  if (action_id < 0 || action_id >= env::kNumActions) {
    throw ConfigError("input: action id " + std::to_string(action_id) + " is not one of the 9 legal actions");
  }
  const auto& s = slots_.at(static_cast<std::size_t>(slot));
  if (!s.connected) return InputDecision::rejected;
  if (state_ == State::episode || (state_ == State::tutorials && s.run)) {
    return inputs_.offer(slot, env::action_from_index(action_id), now);
  }
  return InputDecision::rejected;
}

std::optional<Millis> Session::next_deadline() const {
  switch (state_) {
    case State::paused: return resume_deadline_;
    case State::tutorials:
    case State::episode:
    case State::between: return next_tick_;
    default: return std::nullopt;
  }
}

void Session::advance(Millis now, std::vector<Outbound>& out) {
  for (;;) {
    if (state_ == State::paused) {
      if (now >= resume_deadline_) finish(false, "reconnection window expired", out);
      return;
    }
    if (state_ == State::between) {
      if (next_tick_ > now) return;
      start_episode(next_tick_, out);
      continue;
    }
    if (state_ != State::tutorials && state_ != State::episode) return;
    if (next_tick_ > now) return;
    const Millis t = next_tick_;
    next_tick_ += config_.tick;
    if (state_ == State::tutorials) {
      tick_tutorials(out);
      if (state_ == State::between) next_tick_ = t + config_.between_phases;
    } else {
      tick_episode(out);
      if (game_->done(world_)) end_episode(t, out);
    }
  }
}

json Session::phase_start_message(int slot) const {
  const auto& s = slots_[static_cast<std::size_t>(slot)];
  if (state_ == State::tutorials || (state_ == State::paused && resume_state_ == State::tutorials)) {
    const auto& t = s.run->tutorial();
    return make_message(MessageType::phase_start, {{"phase", "tutorial"},
                                                   {"index", t.index},
                                                   {"topic", t.topic},
                                                   {"text", t.text},
                                                   {"goal", t.goal_json()},
                                                   {"steps", t.max_steps},
                                                   {"window", t.config.obs_window}});
  }
  const int e = config_.episodes_per_condition;
  return make_message(MessageType::phase_start, {{"phase", "episode"},
                                                 {"index", episode_ + 1},
                                                 {"condition", std::string(to_string(condition_of(episode_)))},
                                                 {"task_index", episode_ / e + 1},
                                                 {"episode_index", episode_ % e},
                                                 {"steps", config_.env.episode_length},
                                                 {"window", config_.env.obs_window}});
}

void Session::send_frame(int slot, std::vector<Outbound>& out) {
  auto& s = slots_[static_cast<std::size_t>(slot)];
  const bool tutorial = s.run != nullptr && (state_ == State::tutorials || resume_state_ == State::tutorials);
  const env::CleanupGame& game = tutorial ? s.run->game() : *game_;
  const env::WorldState& world = tutorial ? s.run->state() : world_;
  const int viewer = tutorial ? 0 : slot;
  const Condition cond = tutorial ? Condition::identifiable : condition_of(episode_);
  auto tiles = render_tiles(game, world, viewer, cond, game.config().obs_window);

  Hud hud;
  hud.tickets = world.avatars[static_cast<std::size_t>(viewer)].tickets_remaining;
  if (tutorial) {
    hud.episode_earnings = s.run->score();
  } else {
    const double prior = std::accumulate(scores_.begin(), scores_.end(), 0.0, [&](double a, const EpisodeScore& e) {
      return a + e.scores[static_cast<std::size_t>(slot)];
    });
    hud.episode_earnings = episode_scores_[static_cast<std::size_t>(slot)];
    hud.cumulative_earnings = prior + hud.episode_earnings;
    const auto view = trackers_[static_cast<std::size_t>(slot)].observer_view(slot);
    hud.own_contribution = view[0];
    hud.peer_contributions.assign(view.begin() + 1, view.end());
  }

  json f = {{"phase", tutorial ? "tutorial" : "episode"},
            {"index", tutorial ? s.run->tutorial().index : episode_ + 1},
            {"t", world.t},
            {"facing", static_cast<int>(world.avatars[static_cast<std::size_t>(viewer)].facing)},
            {"hud", hud_json(hud, cond)}};
  if (s.need_keyframe || s.last_tiles.size() != tiles.size()) {
    f["keyframe"] = true;
    f["tiles"] = tiles;
    f["delta"] = json::array();
    s.need_keyframe = false;
  } else {
    f["keyframe"] = false;
    f["delta"] = tile_delta(s.last_tiles, tiles);
  }
  s.last_tiles = std::move(tiles);
  if (s.connected) out.push_back({slot, make_message(MessageType::frame, std::move(f))});
}

void Session::start_tutorials(Millis now, std::vector<Outbound>& out) {
  state_ = State::tutorials;
  phase_started_ = now;
  next_tick_ = now + config_.tick;
  for (int i = 0; i < kGroupSize; ++i) start_tutorial(i, out);
}

void Session::start_tutorial(int slot, std::vector<Outbound>& out) {
  auto& s = slots_[static_cast<std::size_t>(slot)];
  const auto& t = config_.tutorials[static_cast<std::size_t>(s.tutorial)];
  s.run = std::make_unique<TutorialRun>(
      t, derive_seed(config_.seed, "tutorial", static_cast<std::uint64_t>(slot * 64 + s.tutorial)));
  s.need_keyframe = true;
  if (s.connected) out.push_back({slot, phase_start_message(slot)});
  send_frame(slot, out);
}

void Session::tick_tutorials(std::vector<Outbound>& out) {
  bool all_done = true;
  for (int i = 0; i < kGroupSize; ++i) {
    auto& s = slots_[static_cast<std::size_t>(i)];
    if (!s.run) continue;
    s.run->step(inputs_.take(i).value_or(env::Action::noop));
    send_frame(i, out);
    if (s.run->finished()) {
      if (s.connected) {
        out.push_back({i, make_message(MessageType::phase_end, {{"phase", "tutorial"},
                                                                {"index", s.run->tutorial().index},
                                                                {"episode_score", s.run->score()},
                                                                {"cumulative_score", 0.0},
                                                                {"goal_met", s.run->goal_met()}})});
      }
      ++s.tutorial;
      if (s.tutorial < static_cast<int>(config_.tutorials.size())) {
        start_tutorial(i, out);
      } else {
        s.run.reset();
      }
    }
    all_done = all_done && !s.run;
  }
  if (all_done) {
    state_ = State::between;
    inputs_.clear();
  }
}

void Session::start_episode(Millis now, std::vector<Outbound>& out) {
  ++episode_;
  state_ = State::episode;
  phase_started_ = now;
  next_tick_ = now + config_.tick;
  inputs_.clear();
  const Condition cond = condition_of(episode_);
  game_ = std::make_unique<env::CleanupGame>(config_.env, config_.map);
  const std::uint64_t seed = derive_seed(config_.seed, "episode", static_cast<std::uint64_t>(episode_));
  world_ = game_->reset(seed);
  trackers_.assign(static_cast<std::size_t>(kGroupSize), reputation::ContributionTracker(kGroupSize));
  episode_scores_.assign(static_cast<std::size_t>(kGroupSize), 0.0);
  std::vector<std::string> ids;
  for (const auto& s : slots_) ids.push_back(s.participant_id);
  std::string preset = "custom";
  if (config_.env == env::EnvConfig::human_paper()) preset = "human-paper";
  if (config_.env == env::EnvConfig::agent_paper()) preset = "agent-paper";
  recorder_ = std::make_unique<env::EpisodeRecorder>(*game_, world_, seed, cond, std::move(ids), preset);
  auto& h = recorder_->header();
  h.group_id = config_.group_id;
  h.episode_index = episode_ % config_.episodes_per_condition;
  h.task_index = episode_ / config_.episodes_per_condition + 1;
  h.session_id = config_.session_id;
  for (int i = 0; i < kGroupSize; ++i) {
    slots_[static_cast<std::size_t>(i)].need_keyframe = true;
    if (slots_[static_cast<std::size_t>(i)].connected) out.push_back({i, phase_start_message(i)});
    send_frame(i, out);
  }
}

void Session::tick_episode(std::vector<Outbound>& out) {
  std::vector<env::Action> actions(static_cast<std::size_t>(kGroupSize));
  for (int i = 0; i < kGroupSize; ++i) actions[static_cast<std::size_t>(i)] = inputs_.take(i).value_or(env::Action::noop);
  const auto ev = game_->step(world_, actions);
  std::vector<std::uint8_t> contributed(static_cast<std::size_t>(kGroupSize));
  std::vector<Pos> positions(static_cast<std::size_t>(kGroupSize));
  for (std::size_t i = 0; i < contributed.size(); ++i) {
    contributed[i] = ev.players[i].contributed;
    positions[i] = world_.avatars[i].pos;
    episode_scores_[i] += ev.players[i].reward;
  }
  const Condition cond = condition_of(episode_);
  for (int i = 0; i < kGroupSize; ++i) trackers_[static_cast<std::size_t>(i)].update(contributed, positions, i, cond);
  recorder_->record(world_, actions, ev);
  for (int i = 0; i < kGroupSize; ++i) send_frame(i, out);
}

void Session::end_episode(Millis now, std::vector<Outbound>& out) {
  records_.push_back(recorder_->finish());
  recorder_.reset();
  scores_.push_back({episode_ + 1, condition_of(episode_), episode_scores_});
  const auto summary = score_summary();
  for (int i = 0; i < kGroupSize; ++i) {
    if (!slots_[static_cast<std::size_t>(i)].connected) continue;
    out.push_back({i, make_message(MessageType::phase_end,
                                   {{"phase", "episode"},
                                    {"index", episode_ + 1},
                                    {"episode_score", episode_scores_[static_cast<std::size_t>(i)]},
                                    {"cumulative_score", summary.cumulative[static_cast<std::size_t>(i)]}})});
  }
  if (episode_ + 1 >= 2 * config_.episodes_per_condition) {
    finish(true, "", out);
    return;
  }
  state_ = State::between;
  next_tick_ = now + config_.between_phases;
}

void Session::finish(bool valid, const std::string& reason, std::vector<Outbound>& out) {
  state_ = valid ? State::finished : State::aborted;
  json m = {{"valid", valid}, {"summary", score_summary().to_json()}};
  if (!reason.empty()) m["reason"] = reason;
  broadcast(make_message(MessageType::session_end, std::move(m)), out);
}

ScoreSummary Session::score_summary() const {
  ScoreSummary s;
  for (const auto& slot : slots_) s.participants.push_back(slot.participant_id);
  s.cumulative.assign(static_cast<std::size_t>(kGroupSize), 0.0);
  for (const auto& e : scores_) {
    for (std::size_t i = 0; i < s.cumulative.size(); ++i) s.cumulative[i] += e.scores[i];
  }
  s.episodes = scores_;
  return s;
}

}  // namespace cleanup::server
