#pragma once

#include <optional>

#include "cleanup/env/episode_record.hpp"
#include "cleanup/env/game.hpp"

namespace cleanup::io {

struct ReplayResult {
  env::WorldState final_state;
  int steps = 0;
};

/// Re-simulates a record from its seed and actions, checking the config
/// digest, the initial digest and every per-step digest. A mismatch throws
/// CorruptionError naming the first divergent step. With `expected`, the
/// record must have been produced under exactly that configuration.
ReplayResult replay(const env::EpisodeRecord& record, const std::optional<env::EnvConfig>& expected = std::nullopt);

}  // namespace cleanup::io
