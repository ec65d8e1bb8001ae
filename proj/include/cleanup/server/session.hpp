#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cleanup/env/episode_record.hpp"
#include "cleanup/env/game.hpp"
#include "cleanup/reputation/reputation.hpp"
#include "cleanup/server/input_buffer.hpp"
#include "cleanup/server/tutorials.hpp"

namespace cleanup::server {

enum class ConditionOrder { identifiable_first, anonymous_first };

std::string_view to_string(ConditionOrder o);

/// Hands out condition orders across sessions. `auto` alternates starting
/// with identifiable-first, so any even number of sessions is balanced.
class OrderAssigner {
 public:
  explicit OrderAssigner(std::optional<ConditionOrder> fixed = std::nullopt) : fixed_(fixed) {}
  ConditionOrder next();

 private:
  std::optional<ConditionOrder> fixed_;
  int issued_ = 0;
};

/// "auto", "identifiable-first" or "anonymous-first".
std::optional<ConditionOrder> parse_order(std::string_view s);

struct SessionConfig {
  env::EnvConfig env = env::EnvConfig::human_paper();
  std::shared_ptr<const env::GridMap> map = env::GridMap::default_map();
  std::vector<Tutorial> tutorials;  // empty = skip the tutorial stage
  int episodes_per_condition = 7;
  Millis tick{60};
  Millis input_window{100};
  Millis reconnect_window{60'000};
  Millis between_phases{3'000};
  std::uint64_t seed = 0;
  int group_id = 0;
  std::string session_id = "session-0";

  void validate() const;
};

struct Outbound {
  int slot = 0;
  nlohmann::json message;
};

struct EpisodeScore {
  int episode = 0;  // 1-based position in the schedule
  Condition condition = Condition::identifiable;
  std::vector<double> scores;  // per slot
};

struct ScoreSummary {
  std::vector<std::string> participants;
  std::vector<double> cumulative;
  std::vector<EpisodeScore> episodes;

  nlohmann::json to_json() const;
};

/// Authoritative state machine for one five-participant session. Time is
/// passed in by the caller, so the session runs identically under a real
/// or a simulated clock. Messages for participants are appended to `out`.
class Session {
 public:
  enum class State { lobby, tutorials, between, episode, paused, finished, aborted };

  Session(SessionConfig config, ConditionOrder order);

  /// Takes a free slot, or resumes the slot owning `token`. Returns the slot,
  /// or nullopt when the lobby is full or the token is unknown.
  std::optional<int> join(const std::optional<std::string>& token, Millis now, std::vector<Outbound>& out);

  void disconnect(int slot, Millis now, std::vector<Outbound>& out);

  /// Rejects ids outside the nine legal actions with ConfigError. Input
  /// outside an active phase is dropped.
  InputDecision input(int slot, int action_id, Millis now);

  /// Runs every tick due at or before `now`.
  void advance(Millis now, std::vector<Outbound>& out);

  /// When advance() next has work to do.
  std::optional<Millis> next_deadline() const;

  State state() const { return state_; }
  bool done() const { return state_ == State::finished || state_ == State::aborted; }
  bool valid() const { return state_ == State::finished; }
  ConditionOrder order() const { return order_; }
  const SessionConfig& config() const { return config_; }
  bool connected(int slot) const { return slots_.at(static_cast<std::size_t>(slot)).connected; }
  int connected_count() const;

  /// Condition of scored episode k (0-based).
  Condition condition_of(int episode) const;

  const std::vector<env::EpisodeRecord>& records() const { return records_; }
  ScoreSummary score_summary() const;

 private:
  struct Slot {
    bool taken = false;
    bool connected = false;
    std::string token;
    std::string participant_id;
    std::vector<std::string> last_tiles;
    bool need_keyframe = true;
    // tutorial progress
    int tutorial = 0;
    std::unique_ptr<TutorialRun> run;
  };

  void broadcast(const nlohmann::json& m, std::vector<Outbound>& out) const;
  void start_tutorials(Millis now, std::vector<Outbound>& out);
  void start_tutorial(int slot, std::vector<Outbound>& out);
  void tick_tutorials(std::vector<Outbound>& out);
  void start_episode(Millis now, std::vector<Outbound>& out);
  void tick_episode(std::vector<Outbound>& out);
  void end_episode(Millis now, std::vector<Outbound>& out);
  void finish(bool valid, const std::string& reason, std::vector<Outbound>& out);
  nlohmann::json phase_start_message(int slot) const;
  void send_frame(int slot, std::vector<Outbound>& out);
  std::string new_token(int slot);

  SessionConfig config_;
  ConditionOrder order_;
  State state_ = State::lobby;
  State resume_state_ = State::lobby;
  Millis paused_at_{0};
  Millis resume_deadline_{0};
  Millis next_tick_{0};
  Millis phase_started_{0};
  std::vector<Slot> slots_;
  InputBuffer inputs_;
  Rng token_rng_;

  int episode_ = -1;  // scored episode in progress or last finished
  std::unique_ptr<env::CleanupGame> game_;
  env::WorldState world_;
  std::vector<reputation::ContributionTracker> trackers_;
  std::unique_ptr<env::EpisodeRecorder> recorder_;
  std::vector<double> episode_scores_;
  std::vector<EpisodeScore> scores_;
  std::vector<env::EpisodeRecord> records_;
};

}  // namespace cleanup::server
