#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cleanup/net/policy_net.hpp"
#include "cleanup/rl/trajectory.hpp"

namespace cleanup::rl {

struct A2cHyper {
  double learning_rate = 0.000321;
  double rms_decay = 0.99;
  double rms_epsilon = 1e-5;
  double momentum = 0.0;
  double entropy_cost = 0.00154;
  double discount = 0.99;
  double value_cost = 0.5;
  double clip_rho = 1.0;
  double clip_c = 1.0;
  int batch_size = 10;
  int segment_length = 100;
  std::optional<double> max_grad_norm;  // off by default

  void validate() const;
  bool operator==(const A2cHyper&) const = default;
};

/// G_t = r_t + gamma * G_{t+1}, with G_L = bootstrap.
std::vector<double> discounted_return(std::span<const double> rewards, double gamma, double bootstrap = 0.0);

struct VTraceTargets {
  std::vector<double> values;      // v_s, regression targets for V(x_s)
  std::vector<double> advantages;  // rho_s * (r_s + gamma * v_{s+1} - V(x_s))
};

/// V-trace off-policy targets with truncated importance weights
/// rho_t = min(clip_rho, pi/mu) and c_t = min(clip_c, pi/mu).
VTraceTargets vtrace(std::span<const double> behavior_logp, std::span<const double> target_logp,
                     std::span<const double> rewards, std::span<const double> values, double bootstrap_value,
                     double gamma, double clip_rho = 1.0, double clip_c = 1.0);

struct LossTerms {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;  // summed policy entropy (before the cost factor)
  double total = 0.0;
  int steps = 0;
};

/// Loss for one segment from the learner's logits and values:
///   -sum adv * log pi(a) + value_cost * sum (v - V)^2 - entropy_cost * sum H(pi).
/// Advantages and value targets are constants. Writes dLoss/dlogits and
/// dLoss/dvalues when the output pointers are non-null.
template <typename T>
LossTerms segment_loss(const net::Mat<T>& logits, const net::Vec<T>& values, std::span<const int> actions,
                       const VTraceTargets& targets, const A2cHyper& hyper, net::Mat<T>* dlogits,
                       net::Vec<T>* dvalues);

/// Targets for one segment given the learner's own unroll.
template <typename T>
VTraceTargets segment_targets(const Trajectory& traj, const net::Mat<T>& logits, const net::Vec<T>& values,
                              T bootstrap_value, const A2cHyper& hyper);

/// Loss over a batch for `net`. With `frozen` empty the V-trace targets are
/// computed from the current parameters (and stored into `targets_out` when
/// given); otherwise `frozen` is used. Gradients accumulate into `grads`
/// when it is non-empty.
template <typename T>
LossTerms batch_loss(const net::PolicyNet<T>& net, std::span<const Trajectory> batch, const A2cHyper& hyper,
                     std::span<const VTraceTargets> frozen, std::span<T> grads,
                     std::vector<VTraceTargets>* targets_out = nullptr);

struct UpdateStats {
  LossTerms loss;
  double grad_norm = 0.0;
  double mean_extrinsic = 0.0;  // per step over the batch
  double mean_intrinsic = 0.0;
};

/// One RMSProp-driven A2C update. Throws NumericError (with a diagnostic
/// summary) if the loss or gradients are non-finite; parameters are left
/// untouched in that case.
UpdateStats a2c_update(net::PolicyNet<float>& net, std::vector<float>& accumulators, std::vector<float>& momentum,
                       std::span<const Trajectory> batch, const A2cHyper& hyper);

}  // namespace cleanup::rl
