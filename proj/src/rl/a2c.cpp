#include "cleanup/rl/a2c.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cleanup/common/errors.hpp"
#include "cleanup/rl/rmsprop.hpp"

namespace cleanup::rl {

void A2cHyper::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("a2c: learning_rate must be positive");
  if (!(rms_decay >= 0.0 && rms_decay < 1.0)) throw ConfigError("a2c: rms_decay must lie in [0, 1)");
  if (!(rms_epsilon > 0.0)) throw ConfigError("a2c: rms_epsilon must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("a2c: momentum must lie in [0, 1)");
  if (!(entropy_cost >= 0.0)) throw ConfigError("a2c: entropy_cost must be >= 0");
  if (!(discount >= 0.0 && discount <= 1.0)) throw ConfigError("a2c: discount must lie in [0, 1]");
  if (!(value_cost >= 0.0)) throw ConfigError("a2c: value_cost must be >= 0");
  if (!(clip_rho > 0.0 && clip_c > 0.0)) throw ConfigError("a2c: v-trace clip constants must be positive");
  if (batch_size < 1 || segment_length < 1) throw ConfigError("a2c: batch_size and segment_length must be >= 1");
  if (max_grad_norm && !(*max_grad_norm > 0.0)) throw ConfigError("a2c: max_grad_norm must be positive");
}

std::vector<double> discounted_return(std::span<const double> rewards, double gamma, double bootstrap) {
  std::vector<double> out(rewards.size());
  double acc = bootstrap;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    out[i] = acc;
  }
  return out;
}

VTraceTargets vtrace(std::span<const double> behavior_logp, std::span<const double> target_logp,
                     std::span<const double> rewards, std::span<const double> values, double bootstrap_value,
                     double gamma, double clip_rho, double clip_c) {
  const std::size_t n = rewards.size();
  if (behavior_logp.size() != n || target_logp.size() != n || values.size() != n) {
    throw ConfigError("vtrace: behaviour/target log-probs, rewards and values must align");
  }
  VTraceTargets out;
  out.values.resize(n);
  out.advantages.resize(n);
  std::vector<double> rho(n), c(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double ratio = std::exp(target_logp[s] - behavior_logp[s]);
    rho[s] = std::min(clip_rho, ratio);
    c[s] = std::min(clip_c, ratio);
  }
  double acc = 0.0;  // v_{s+1} - V(x_{s+1})
  for (std::size_t s = n; s-- > 0;) {
    const double next_value = s + 1 < n ? values[s + 1] : bootstrap_value;
    const double delta = rho[s] * (rewards[s] + gamma * next_value - values[s]);
    acc = delta + gamma * c[s] * acc;
    out.values[s] = values[s] + acc;
  }
  for (std::size_t s = 0; s < n; ++s) {
    const double next_target = s + 1 < n ? out.values[s + 1] : bootstrap_value;
    out.advantages[s] = rho[s] * (rewards[s] + gamma * next_target - values[s]);
  }
  return out;
}

template <typename T>
VTraceTargets segment_targets(const Trajectory& traj, const net::Mat<T>& logits, const net::Vec<T>& values,
                              T bootstrap_value, const A2cHyper& hyper) {
  const int n = traj.length;
  const int actions = static_cast<int>(logits.rows());
  std::vector<double> behavior(static_cast<std::size_t>(n)), target(static_cast<std::size_t>(n));
  std::vector<double> rewards(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(actions));
  for (int s = 0; s < n; ++s) {
    const auto us = static_cast<std::size_t>(s);
    const int a = traj.actions[us];
    for (int k = 0; k < actions; ++k) z[static_cast<std::size_t>(k)] = traj.behavior_logits[us * static_cast<std::size_t>(actions) + static_cast<std::size_t>(k)];
    behavior[us] = net::log_softmax(z)[static_cast<std::size_t>(a)];
    for (int k = 0; k < actions; ++k) z[static_cast<std::size_t>(k)] = static_cast<double>(logits(k, s));
    target[us] = net::log_softmax(z)[static_cast<std::size_t>(a)];
    rewards[us] = traj.rewards[us];
    v[us] = static_cast<double>(values(s));
  }
  const double boot = traj.terminal ? 0.0 : static_cast<double>(bootstrap_value);
  return vtrace(behavior, target, rewards, v, boot, hyper.discount, hyper.clip_rho, hyper.clip_c);
}

template <typename T>
LossTerms segment_loss(const net::Mat<T>& logits, const net::Vec<T>& values, std::span<const int> actions,
                       const VTraceTargets& targets, const A2cHyper& hyper, net::Mat<T>* dlogits,
                       net::Vec<T>* dvalues) {
  const auto n = static_cast<int>(actions.size());
  const auto A = static_cast<int>(logits.rows());
  if (logits.cols() < n || values.size() < n || static_cast<int>(targets.values.size()) != n) {
    throw ConfigError("loss: logits, values and targets must cover every step");
  }
  if (dlogits) dlogits->setZero(A, logits.cols());
  if (dvalues) dvalues->setZero(values.size());
  LossTerms terms;
  terms.steps = n;
  std::vector<double> z(static_cast<std::size_t>(A));
  for (int s = 0; s < n; ++s) {
    for (int k = 0; k < A; ++k) z[static_cast<std::size_t>(k)] = static_cast<double>(logits(k, s));
    const auto logp = net::log_softmax(z);
    double entropy = 0.0;
    for (double lp : logp) entropy -= std::exp(lp) * lp;
    const auto us = static_cast<std::size_t>(s);
    const int a = actions[us];
    const double adv = targets.advantages[us];
    const double err = static_cast<double>(values(s)) - targets.values[us];
    terms.policy += -adv * logp[static_cast<std::size_t>(a)];
    terms.value += hyper.value_cost * err * err;
    terms.entropy += entropy;
    if (dlogits) {
      for (int k = 0; k < A; ++k) {
        const double p = std::exp(logp[static_cast<std::size_t>(k)]);
        const double policy_grad = -adv * ((k == a ? 1.0 : 0.0) - p);
        // d(-H)/dz_k = p_k (log p_k + H)
        const double entropy_grad = hyper.entropy_cost * p * (logp[static_cast<std::size_t>(k)] + entropy);
        (*dlogits)(k, s) = static_cast<T>(policy_grad + entropy_grad);
      }
    }
    if (dvalues) (*dvalues)(s) = static_cast<T>(2.0 * hyper.value_cost * err);
  }
  terms.total = terms.policy + terms.value - hyper.entropy_cost * terms.entropy;
  return terms;
}

template <typename T>
LossTerms batch_loss(const net::PolicyNet<T>& net, std::span<const Trajectory> batch, const A2cHyper& hyper,
                     std::span<const VTraceTargets> frozen, std::span<T> grads,
                     std::vector<VTraceTargets>* targets_out) {
  if (!frozen.empty() && frozen.size() != batch.size()) throw ConfigError("loss: frozen target count mismatch");
  const bool want_grads = !grads.empty();
  const auto& cfg = net.config();
  LossTerms total;
  if (targets_out) targets_out->clear();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Trajectory& traj = batch[b];
    if (traj.length < 1) throw ConfigError("loss: empty trajectory");
    net::RecurrentState<T> init;
    init.hidden = Eigen::Map<const Eigen::VectorXf>(traj.initial_hidden.data(), cfg.lstm).template cast<T>();
    init.cell = Eigen::Map<const Eigen::VectorXf>(traj.initial_cell.data(), cfg.lstm).template cast<T>();
    auto unrolled = net.unroll(traj.observations, traj.scalars, traj.length, init, want_grads);

    VTraceTargets targets;
    if (frozen.empty()) {
      T boot = T(0);
      if (!traj.terminal) {
        auto state = unrolled.final_state;
        boot = net.forward(traj.bootstrap_observation, traj.bootstrap_scalars, state).value;
      }
      targets = segment_targets(traj, unrolled.logits, unrolled.values, boot, hyper);
    } else {
      targets = frozen[b];
    }

    net::Mat<T> dlogits;
    net::Vec<T> dvalues;
    const auto terms = segment_loss<T>(unrolled.logits, unrolled.values,
                                       std::span<const int>(traj.actions.data(), static_cast<std::size_t>(traj.length)),
                                       targets, hyper, want_grads ? &dlogits : nullptr,
                                       want_grads ? &dvalues : nullptr);
    if (want_grads) net.backward(unrolled, dlogits, dvalues, grads);
    total.policy += terms.policy;
    total.value += terms.value;
    total.entropy += terms.entropy;
    total.total += terms.total;
    total.steps += terms.steps;
    if (targets_out) targets_out->push_back(std::move(targets));
  }
  return total;
}

UpdateStats a2c_update(net::PolicyNet<float>& net, std::vector<float>& accumulators, std::vector<float>& momentum,
                       std::span<const Trajectory> batch, const A2cHyper& hyper) {
  if (batch.empty()) throw ConfigError("a2c_update: empty batch");
  auto& params = net.params();
  if (accumulators.size() != params.size()) accumulators.assign(params.size(), 0.0f);
  if (hyper.momentum != 0.0 && momentum.size() != params.size()) momentum.assign(params.size(), 0.0f);
  net::ParamVec<float> grads(params.size(), 0.0f);

  UpdateStats stats;
  stats.loss = batch_loss<float>(net, batch, hyper, {}, grads);
  double sq = 0.0;
  for (float g : grads) sq += static_cast<double>(g) * g;
  stats.grad_norm = std::sqrt(sq);
  double ext = 0.0, intr = 0.0;
  for (const auto& t : batch) {
    for (int s = 0; s < t.length; ++s) {
      ext += t.extrinsic[static_cast<std::size_t>(s)];
      intr += t.intrinsic[static_cast<std::size_t>(s)];
    }
  }
  stats.mean_extrinsic = ext / std::max(1, stats.loss.steps);
  stats.mean_intrinsic = intr / std::max(1, stats.loss.steps);

  if (!std::isfinite(stats.loss.total) || !std::isfinite(stats.grad_norm)) {
    std::ostringstream msg;
    msg << "a2c_update: non-finite loss (total=" << stats.loss.total << " policy=" << stats.loss.policy
        << " value=" << stats.loss.value << " entropy=" << stats.loss.entropy << " grad_norm=" << stats.grad_norm
        << " steps=" << stats.loss.steps << " first_segment_agent=" << batch.front().agent << ")";
    throw NumericError(msg.str());
  }
  if (hyper.max_grad_norm && stats.grad_norm > *hyper.max_grad_norm) {
    const auto scale = static_cast<float>(*hyper.max_grad_norm / stats.grad_norm);
    for (float& g : grads) g *= scale;
  }
  const RmsPropConfig rms{hyper.learning_rate, hyper.rms_decay, hyper.rms_epsilon, hyper.momentum};
  rmsprop_step<float>(params, grads, accumulators, rms, momentum);
  return stats;
}

template VTraceTargets segment_targets<float>(const Trajectory&, const net::Mat<float>&, const net::Vec<float>&, float,
                                              const A2cHyper&);
template VTraceTargets segment_targets<double>(const Trajectory&, const net::Mat<double>&, const net::Vec<double>&,
                                               double, const A2cHyper&);
template LossTerms segment_loss<float>(const net::Mat<float>&, const net::Vec<float>&, std::span<const int>,
                                       const VTraceTargets&, const A2cHyper&, net::Mat<float>*, net::Vec<float>*);
template LossTerms segment_loss<double>(const net::Mat<double>&, const net::Vec<double>&, std::span<const int>,
                                        const VTraceTargets&, const A2cHyper&, net::Mat<double>*, net::Vec<double>*);
template LossTerms batch_loss<float>(const net::PolicyNet<float>&, std::span<const Trajectory>, const A2cHyper&,
                                     std::span<const VTraceTargets>, std::span<float>, std::vector<VTraceTargets>*);
template LossTerms batch_loss<double>(const net::PolicyNet<double>&, std::span<const Trajectory>, const A2cHyper&,
                                      std::span<const VTraceTargets>, std::span<double>, std::vector<VTraceTargets>*);

}  // namespace cleanup::rl
