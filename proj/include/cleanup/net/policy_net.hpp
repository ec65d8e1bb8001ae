#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cleanup/common/rng.hpp"

namespace cleanup::net {

/// Architecture: 3x3 convolution (valid padding, stride 1) + ReLU, then the
/// contribution scalars are concatenated to the flattened feature map, an
/// MLP with ReLU layers, an LSTM cell, and linear policy/value heads.
struct NetConfig {
  int obs_channels = 10;
  int obs_size = 15;
  int conv_channels = 32;
  int kernel = 3;
  std::vector<int> mlp = {64, 64};
  int lstm = 128;
  int scalars = 5;
  int actions = 9;

  void validate() const;
  int conv_side() const { return obs_size - kernel + 1; }
  int conv_positions() const { return conv_side() * conv_side(); }
  int conv_features() const { return conv_channels * conv_positions(); }
  int obs_dim() const { return obs_channels * obs_size * obs_size; }

  bool operator==(const NetConfig&) const = default;
};

struct TensorSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Named tensors packed into one flat parameter vector (column-major each).
class ParamLayout {
 public:
  explicit ParamLayout(const NetConfig& config);

  const std::vector<TensorSpec>& tensors() const { return tensors_; }
  const TensorSpec& find(const std::string& name) const;
  std::size_t total() const { return total_; }

 private:
  void add(std::string name, int rows, int cols);
  std::vector<TensorSpec> tensors_;
  std::size_t total_ = 0;
};

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Parameter and gradient storage. A fixed base alignment keeps Eigen's
/// vectorized reductions over mapped tensors bit-reproducible.
template <typename T>
using ParamVec = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename T>
struct RecurrentState {
  Vec<T> hidden;
  Vec<T> cell;
  bool operator==(const RecurrentState& o) const { return hidden == o.hidden && cell == o.cell; }
};

template <typename T>
struct PolicyOutput {
  Vec<T> logits;
  T value{};
};

/// Activations of an L-step unroll kept for the backward pass.
template <typename T>
struct UnrollCache {
  int length = 0;
  Mat<T> columns;      // im2col of the observations, [C*k*k, P*L]
  Mat<T> conv_pre;     // [F, P*L]
  Mat<T> conv_out;     // relu(conv_pre)
  Mat<T> scalars;      // [S, L]
  std::vector<Mat<T>> mlp_pre;
  std::vector<Mat<T>> mlp_out;
  Mat<T> gates;        // post-activation i, f, g, o stacked, [4H, L]
  Mat<T> cells;        // c_t, [H, L]
  Mat<T> hidden;       // h_t, [H, L]
  Mat<T> prev_cells;   // c_{t-1}
  Mat<T> prev_hidden;  // h_{t-1}
};

template <typename T>
struct UnrollResult {
  Mat<T> logits;  // [A, L]
  Vec<T> values;  // [L]
  RecurrentState<T> final_state;
  UnrollCache<T> cache;  // empty unless requested
};

/// Per-agent function approximator. Parameters are a flat vector so the
/// optimizer and checkpointing can treat them uniformly.
template <typename T>
class PolicyNet {
 public:
  explicit PolicyNet(NetConfig config);

  const NetConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  ParamVec<T>& params() { return params_; }
  const ParamVec<T>& params() const { return params_; }
  /// Throws ConfigError on a size mismatch.
  void set_params(std::span<const T> values);

  /// Fan-in scaled uniform weights, zero biases.
  void init(Rng& rng);

  RecurrentState<T> initial_state() const;

  /// One step. `observation` holds obs_dim floats, `scalars` config.scalars.
  PolicyOutput<T> forward(std::span<const float> observation, std::span<const float> scalars,
                          RecurrentState<T>& state) const;

  /// L consecutive steps from `initial`; observations are L*obs_dim floats.
  UnrollResult<T> unroll(std::span<const float> observations, std::span<const float> scalars, int length,
                         const RecurrentState<T>& initial, bool keep_cache) const;

  /// Accumulates dLoss/dparams into `grads` given dLoss/dlogits [A, L] and
  /// dLoss/dvalues [L]. Gradients do not flow into the initial state.
  void backward(const UnrollResult<T>& unrolled, const Mat<T>& dlogits, const Vec<T>& dvalues,
                std::span<T> grads) const;

 private:
  Eigen::Map<const Mat<T>> tensor(const std::string& name) const;

  NetConfig config_;
  ParamLayout layout_;
  ParamVec<T> params_;
};

extern template class PolicyNet<float>;
extern template class PolicyNet<double>;

/// Numerically stable softmax of a logit vector.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

/// Categorical draw from softmax(logits). Throws NumericError on non-finite input.
int sample_action(std::span<const float> logits, Rng& rng);
int sample_action(std::span<const double> logits, Rng& rng);

}  // namespace cleanup::net
