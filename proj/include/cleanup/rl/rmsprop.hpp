#pragma once

#include <span>

namespace cleanup::rl {

struct RmsPropConfig {
  double learning_rate = 0.000321;
  double decay = 0.99;
  double epsilon = 1e-5;
  double momentum = 0.0;
};

/// v <- decay * v + (1 - decay) * g^2;  theta <- theta - lr * g / sqrt(v + eps).
/// With momentum m > 0: u <- m * u + lr * g / sqrt(v + eps); theta <- theta - u.
template <typename T>
void rmsprop_step(std::span<T> params, std::span<const T> grads, std::span<T> accumulators, const RmsPropConfig& cfg,
                  std::span<T> momentum_buffer = {});

extern template void rmsprop_step<float>(std::span<float>, std::span<const float>, std::span<float>,
                                         const RmsPropConfig&, std::span<float>);
extern template void rmsprop_step<double>(std::span<double>, std::span<const double>, std::span<double>,
                                          const RmsPropConfig&, std::span<double>);

}  // namespace cleanup::rl
