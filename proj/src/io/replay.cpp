#include "cleanup/io/replay.hpp"

#include "cleanup/common/digest.hpp"
#include "cleanup/common/errors.hpp"

namespace cleanup::io {

ReplayResult replay(const env::EpisodeRecord& record, const std::optional<env::EnvConfig>& expected) {
  if (record.config.digest() != record.config_digest) {
    throw CorruptionError("config digest mismatch: record header says " + to_hex(record.config_digest) +
                          " but its config hashes to " + to_hex(record.config.digest()));
  }
  if (expected && expected->digest() != record.config_digest) {
    throw CorruptionError("config digest mismatch: record was produced with config " + to_hex(record.config_digest) +
                          ", expected " + to_hex(expected->digest()));
  }
  auto map = std::make_shared<const env::GridMap>(env::GridMap::parse(record.map_text, record.players()));
  const env::CleanupGame game(record.config, map);
  ReplayResult out;
  out.final_state = game.reset(record.seed);
  if (game.digest(out.final_state) != record.initial_digest) {
    throw CorruptionError("initial state digest mismatch", 0);
  }
  std::vector<env::Action> actions(static_cast<std::size_t>(record.players()));
  for (std::size_t t = 0; t < record.steps.size(); ++t) {
    const auto& s = record.steps[t];
    for (std::size_t i = 0; i < actions.size(); ++i) actions[i] = s.players[i].action;
    game.step(out.final_state, actions);
    const auto d = game.digest(out.final_state);
    if (d != s.digest) {
      throw CorruptionError("replay diverged at step " + std::to_string(t) + ": digest " + to_hex(d) + " != recorded " +
                                to_hex(s.digest),
                            static_cast<long>(t));
    }
    ++out.steps;
  }
  if (!record.steps.empty() && record.final_digest != record.steps.back().digest) {
    throw CorruptionError("final digest disagrees with the last step", static_cast<long>(record.steps.size()) - 1);
  }
  return out;
}

}  // namespace cleanup::io
