#include "cleanup/rl/rmsprop.hpp"

#include <cmath>

#include "cleanup/common/errors.hpp"

namespace cleanup::rl {

template <typename T>
void rmsprop_step(std::span<T> params, std::span<const T> grads, std::span<T> accumulators, const RmsPropConfig& cfg,
                  std::span<T> momentum_buffer) {
  if (grads.size() != params.size() || accumulators.size() != params.size()) {
    throw ConfigError("rmsprop: parameter, gradient and accumulator sizes differ");
  }
  const bool use_momentum = cfg.momentum != 0.0;
  if (use_momentum && momentum_buffer.size() != params.size()) {
    throw ConfigError("rmsprop: momentum buffer size mismatch");
  }
  const T decay = static_cast<T>(cfg.decay);
  const T keep = static_cast<T>(1.0 - cfg.decay);
  const T lr = static_cast<T>(cfg.learning_rate);
  const T eps = static_cast<T>(cfg.epsilon);
  const T mom = static_cast<T>(cfg.momentum);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    accumulators[i] = decay * accumulators[i] + keep * g * g;
    const T delta = lr * g / std::sqrt(accumulators[i] + eps);
    if (use_momentum) {
      momentum_buffer[i] = mom * momentum_buffer[i] + delta;
      params[i] -= momentum_buffer[i];
    } else {
      params[i] -= delta;
    }
  }
}

template void rmsprop_step<float>(std::span<float>, std::span<const float>, std::span<float>, const RmsPropConfig&,
                                  std::span<float>);
template void rmsprop_step<double>(std::span<double>, std::span<const double>, std::span<double>,
                                   const RmsPropConfig&, std::span<double>);

}  // namespace cleanup::rl
