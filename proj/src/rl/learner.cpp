#include "cleanup/rl/learner.hpp"

#include "cleanup/common/errors.hpp"

namespace cleanup::rl {

Learner::Learner(int agent_id, net::PolicyNet<float> net, reputation::ReputationParams reputation, A2cHyper hyper,
                 std::int64_t step_budget)
    : agent_id_(agent_id),
      net_(std::move(net)),
      reputation_(reputation),
      hyper_(hyper),
      step_budget_(step_budget) {
  hyper_.validate();
  if (step_budget_ < 0) throw ConfigError("learner: negative step budget");
  accumulators_.assign(net_.params().size(), 0.0f);
  if (hyper_.momentum != 0.0) momentum_.assign(net_.params().size(), 0.0f);
}

std::unique_ptr<Learner> Learner::from_checkpoint(const net::Checkpoint& ckpt, A2cHyper hyper, std::int64_t step_budget) {
  net::PolicyNet<float> net(ckpt.net);
  if (ckpt.params.size() != net.params().size()) throw CorruptionError("checkpoint parameter count mismatch");
  net.set_params(ckpt.params);
  auto l = std::make_unique<Learner>(ckpt.agent_id, std::move(net), ckpt.reputation, hyper, step_budget);
  if (!ckpt.accumulators.empty()) {
    if (ckpt.accumulators.size() != l->accumulators_.size()) {
      throw CorruptionError("checkpoint accumulator count mismatch");
    }
    l->accumulators_ = ckpt.accumulators;
  }
  l->steps_consumed_ = ckpt.steps_consumed;
  l->updates_ = ckpt.updates;
  return l;
}

SubmitResult Learner::submit(Trajectory traj) {
  std::lock_guard lock(mu_);
  if (traj.agent != agent_id_) throw ConfigError("learner: segment routed to the wrong agent");
  if (seen_.contains(traj.id)) return SubmitResult::duplicate;
  if (steps_consumed_ >= step_budget_) return SubmitResult::over_budget;
  seen_.insert(traj.id);
  steps_consumed_ += traj.length;
  pending_.push_back(std::move(traj));
  const bool full = static_cast<int>(pending_.size()) >= hyper_.batch_size;
  if (full || steps_consumed_ >= step_budget_) {
    apply_locked();
    return SubmitResult::updated;
  }
  return SubmitResult::queued;
}

std::optional<UpdateStats> Learner::flush() {
  std::lock_guard lock(mu_);
  if (pending_.empty()) return std::nullopt;
  return apply_locked();
}

UpdateStats Learner::apply_locked() {
  std::vector<Trajectory> batch;
  batch.swap(pending_);
  auto stats = a2c_update(net_, accumulators_, momentum_, batch, hyper_);
  ++updates_;
  stats_.push_back(stats);
  return stats;
}

bool Learner::exhausted() const {
  std::lock_guard lock(mu_);
  return steps_consumed_ >= step_budget_;
}

std::int64_t Learner::steps_consumed() const {
  std::lock_guard lock(mu_);
  return steps_consumed_;
}

std::int64_t Learner::updates() const {
  std::lock_guard lock(mu_);
  return updates_;
}

std::vector<float> Learner::snapshot() const {
  std::lock_guard lock(mu_);
  return {net_.params().begin(), net_.params().end()};
}

net::Checkpoint Learner::checkpoint(Condition condition) const {
  std::lock_guard lock(mu_);
  net::Checkpoint c;
  c.agent_id = agent_id_;
  c.condition = std::string(to_string(condition));
  c.reputation = reputation_;
  c.net = net_.config();
  c.steps_consumed = steps_consumed_;
  c.updates = updates_;
  c.params.assign(net_.params().begin(), net_.params().end());
  c.accumulators = accumulators_;
  return c;
}

std::vector<UpdateStats> Learner::drain_stats() {
  std::lock_guard lock(mu_);
  std::vector<UpdateStats> out;
  out.swap(stats_);
  return out;
}

}  // namespace cleanup::rl
