#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cleanup/env/episode_record.hpp"
#include "cleanup/env/game.hpp"
#include "cleanup/net/policy_net.hpp"
#include "cleanup/reputation/reputation.hpp"
#include "cleanup/rl/trajectory.hpp"

namespace cleanup::rl {

/// A seat in an episode: which network acts and with what reputation weights.
struct AgentSeat {
  int agent_id = 0;
  const net::PolicyNet<float>* net = nullptr;
  reputation::ReputationParams reputation;
};

struct EpisodeOptions {
  Condition condition = Condition::identifiable;
  std::uint64_t arena = 0;
  std::uint64_t episode = 0;
  int segment_length = 100;
  bool emit_segments = true;
  bool record = false;
  std::string preset = "custom";
  int group_id = 0;
  int episode_index = 0;
};

struct EpisodeOutcome {
  std::vector<int> agent_ids;
  std::vector<double> extrinsic;
  std::vector<double> intrinsic;
  std::vector<int> contribution_steps;
  std::optional<env::EpisodeRecord> record;

  double collective_return() const;
  int group_contribution() const;
};

/// Thrown by a segment sink when delivery may not have reached the learner.
class TransientDeliveryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using SegmentSink = std::function<void(const Trajectory&)>;

/// Calls `sink` until it returns normally, retrying on TransientDeliveryError
/// up to `attempts` times. Learners drop repeated segment ids, so a delivery
/// that landed before the error is not applied twice.
void deliver_with_retry(const SegmentSink& sink, const Trajectory& traj, int attempts = 5);

/// Plays one episode with every seat acting from its own network and
/// reputation tracker. Segments of at most `segment_length` steps are handed
/// to `sink` as they complete.
EpisodeOutcome play_episode(const env::CleanupGame& game, std::span<const AgentSeat> seats, std::uint64_t seed,
                            const EpisodeOptions& options, const SegmentSink& sink = {});

}  // namespace cleanup::rl
