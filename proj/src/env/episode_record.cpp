#include "cleanup/env/episode_record.hpp"

#include "cleanup/common/errors.hpp"

namespace cleanup::env {

EpisodeRecorder::EpisodeRecorder(const CleanupGame& game, const WorldState& initial, std::uint64_t seed,
                                 Condition condition, std::vector<std::string> player_ids, std::string preset)
    : game_(game) {
  if (player_ids.size() != initial.avatars.size()) {
    throw ConfigError("recorder: need one player id per avatar");
  }
  record_.config = game.config();
  record_.preset = std::move(preset);
  record_.config_digest = game.config().digest();
  record_.map_text = game.map().serialize();
  record_.seed = seed;
  record_.condition = condition;
  record_.player_ids = std::move(player_ids);
  for (const auto& a : initial.avatars) record_.initial_positions.push_back(a.pos);
  record_.initial_digest = game.digest(initial);
  record_.steps.reserve(static_cast<std::size_t>(game.config().episode_length));
}

void EpisodeRecorder::record(const WorldState& after, std::span<const Action> actions, const StepEvents& events,
                             std::span<const double> intrinsic) {
  StepRecord step;
  step.players.resize(after.avatars.size());
  for (std::size_t i = 0; i < after.avatars.size(); ++i) {
    PlayerStep& p = step.players[i];
    p.pos = after.avatars[i].pos;
    p.facing = after.avatars[i].facing;
    p.action = actions[i];
    p.reward = events.players[i].reward;
    p.contributed = events.players[i].contributed;
    p.apples = static_cast<std::uint8_t>(events.players[i].apples_collected);
  }
  step.polluted_fraction = game_.polluted_fraction(after);
  step.digest = game_.digest(after);
  step.intrinsic.assign(intrinsic.begin(), intrinsic.end());
  record_.steps.push_back(std::move(step));
  record_.final_digest = record_.steps.back().digest;
}

EpisodeRecord EpisodeRecorder::finish() {
  if (static_cast<int>(record_.steps.size()) != record_.config.episode_length) {
    throw StateError("recorder: episode has " + std::to_string(record_.steps.size()) + " steps, expected " +
                     std::to_string(record_.config.episode_length));
  }
  return std::move(record_);
}

EpisodeTotals totals(const EpisodeRecord& record) {
  const auto n = static_cast<std::size_t>(record.players());
  EpisodeTotals t;
  t.extrinsic.assign(n, 0.0);
  t.contribution_steps.assign(n, 0);
  t.apples.assign(n, 0);
  t.intrinsic.assign(n, 0.0);
  for (const auto& step : record.steps) {
    for (std::size_t i = 0; i < n; ++i) {
      t.extrinsic[i] += step.players[i].reward;
      t.contribution_steps[i] += step.players[i].contributed;
      t.apples[i] += step.players[i].apples;
      if (!step.intrinsic.empty()) t.intrinsic[i] += step.intrinsic[i];
    }
  }
  return t;
}

}  // namespace cleanup::env
