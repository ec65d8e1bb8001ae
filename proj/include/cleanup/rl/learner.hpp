#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cleanup/net/checkpoint.hpp"
#include "cleanup/net/policy_net.hpp"
#include "cleanup/reputation/reputation.hpp"
#include "cleanup/rl/a2c.hpp"
#include "cleanup/rl/trajectory.hpp"

namespace cleanup::rl {

enum class SubmitResult {
  queued,       // accepted; waiting for a full batch
  updated,      // accepted and completed a batch
  duplicate,    // this segment id was already accepted
  over_budget,  // the agent has consumed its step budget
};

/// Owns one agent's parameters and optimizer state. Segment application is
/// serialized by an internal mutex, so arenas may submit concurrently.
class Learner {
 public:
  Learner(int agent_id, net::PolicyNet<float> net, reputation::ReputationParams reputation, A2cHyper hyper,
          std::int64_t step_budget);

  static std::unique_ptr<Learner> from_checkpoint(const net::Checkpoint& ckpt, A2cHyper hyper, std::int64_t step_budget);

  SubmitResult submit(Trajectory traj);

  /// Applies a partial batch if one is pending.
  std::optional<UpdateStats> flush();

  int agent_id() const { return agent_id_; }
  const reputation::ReputationParams& reputation() const { return reputation_; }
  bool exhausted() const;
  std::int64_t steps_consumed() const;
  std::int64_t updates() const;
  std::int64_t step_budget() const { return step_budget_; }

  /// Copy of the current parameters, as read by arenas before an episode.
  std::vector<float> snapshot() const;
  const net::NetConfig& net_config() const { return net_.config(); }

  net::Checkpoint checkpoint(Condition condition) const;

  /// Stats of every update since the last call.
  std::vector<UpdateStats> drain_stats();

 private:
  UpdateStats apply_locked();

  int agent_id_;
  net::PolicyNet<float> net_;
  reputation::ReputationParams reputation_;
  A2cHyper hyper_;
  std::int64_t step_budget_;
  std::int64_t steps_consumed_ = 0;
  std::int64_t updates_ = 0;
  std::vector<float> accumulators_;
  std::vector<float> momentum_;
  std::vector<Trajectory> pending_;
  std::set<SegmentId> seen_;
  std::vector<UpdateStats> stats_;
  mutable std::mutex mu_;
};

}  // namespace cleanup::rl
