#include "cleanup/net/policy_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cleanup/common/errors.hpp"

namespace cleanup::net {

void NetConfig::validate() const {
  if (obs_channels < 1 || obs_size < 1 || conv_channels < 1 || kernel < 1) {
    throw ConfigError("net: convolution sizes must be positive");
  }
  if (kernel > obs_size) throw ConfigError("net: kernel larger than observation");
  if (mlp.empty()) throw ConfigError("net: need at least one MLP layer");
  for (int w : mlp) {
    if (w < 1) throw ConfigError("net: MLP widths must be positive");
  }
  if (lstm < 1 || scalars < 0 || actions < 1) throw ConfigError("net: head sizes must be positive");
}

ParamLayout::ParamLayout(const NetConfig& c) {
  c.validate();
  add("conv.w", c.conv_channels, c.obs_channels * c.kernel * c.kernel);
  add("conv.b", c.conv_channels, 1);
  int in = c.conv_features() + c.scalars;
  for (std::size_t i = 0; i < c.mlp.size(); ++i) {
    add("mlp" + std::to_string(i) + ".w", c.mlp[i], in);
    add("mlp" + std::to_string(i) + ".b", c.mlp[i], 1);
    in = c.mlp[i];
  }
  add("lstm.w", 4 * c.lstm, in + c.lstm);
  add("lstm.b", 4 * c.lstm, 1);
  add("policy.w", c.actions, c.lstm);
  add("policy.b", c.actions, 1);
  add("value.w", 1, c.lstm);
  add("value.b", 1, 1);
}

void ParamLayout::add(std::string name, int rows, int cols) {
  TensorSpec spec{std::move(name), rows, cols, total_};
  total_ += spec.size();
  tensors_.push_back(std::move(spec));
}

const TensorSpec& ParamLayout::find(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw ConfigError("net: no tensor named " + name);
}

template <typename T>
PolicyNet<T>::PolicyNet(NetConfig config)
    : config_(std::move(config)), layout_(config_), params_(layout_.total(), T(0)) {}

template <typename T>
void PolicyNet<T>::init(Rng& rng) {
  for (const auto& t : layout_.tensors()) {
    const bool bias = t.name.ends_with(".b");
    const double bound = bias ? 0.0 : 1.0 / std::sqrt(static_cast<double>(t.cols));
    for (std::size_t i = 0; i < t.size(); ++i) {
      params_[t.offset + i] = bias ? T(0) : static_cast<T>(rng.uniform(-bound, bound));
    }
  }
}

template <typename T>
RecurrentState<T> PolicyNet<T>::initial_state() const {
  return {Vec<T>::Zero(config_.lstm), Vec<T>::Zero(config_.lstm)};
}

template <typename T>
void PolicyNet<T>::set_params(std::span<const T> values) {
  if (values.size() != params_.size()) throw ConfigError("net: parameter count mismatch");
  params_.assign(values.begin(), values.end());
}

template <typename T>
Eigen::Map<const Mat<T>> PolicyNet<T>::tensor(const std::string& name) const {
  const auto& spec = layout_.find(name);
  return Eigen::Map<const Mat<T>>(params_.data() + spec.offset, spec.rows, spec.cols);
}

namespace {

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <typename T>
UnrollResult<T> PolicyNet<T>::unroll(std::span<const float> observations, std::span<const float> scalars,
                                     int length, const RecurrentState<T>& initial, bool keep_cache) const {
  const NetConfig& c = config_;
  const auto obs_dim = static_cast<std::size_t>(c.obs_dim());
  if (length < 1) throw ConfigError("net: unroll length must be positive");
  if (observations.size() != obs_dim * static_cast<std::size_t>(length)) {
    throw ConfigError("net: observation size " + std::to_string(observations.size()) + " does not match " +
                      std::to_string(length) + " x " + std::to_string(obs_dim));
  }
  if (scalars.size() != static_cast<std::size_t>(c.scalars * length)) {
    throw ConfigError("net: scalar input size mismatch");
  }
  if (initial.hidden.size() != c.lstm || initial.cell.size() != c.lstm) {
    throw ConfigError("net: recurrent state size mismatch");
  }

  const int k = c.kernel, side = c.conv_side(), positions = c.conv_positions();
  const int patch = c.obs_channels * k * k;
  const int H = c.lstm;

  UnrollResult<T> out;
  UnrollCache<T> cache;
  cache.length = length;

  // im2col: row = (channel, ky, kx), column = (step, oy, ox).
  cache.columns.resize(patch, static_cast<Eigen::Index>(positions) * length);
  for (int l = 0; l < length; ++l) {
    const float* obs = observations.data() + obs_dim * static_cast<std::size_t>(l);
    for (int ch = 0; ch < c.obs_channels; ++ch) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const int row = (ch * k + ky) * k + kx;
          for (int oy = 0; oy < side; ++oy) {
            const float* src = obs + (ch * c.obs_size + oy + ky) * c.obs_size + kx;
            const Eigen::Index col0 = static_cast<Eigen::Index>(l) * positions + oy * side;
            for (int ox = 0; ox < side; ++ox) cache.columns(row, col0 + ox) = static_cast<T>(src[ox]);
          }
        }
      }
    }
  }
  cache.conv_pre = tensor("conv.w") * cache.columns;
  cache.conv_pre.colwise() += tensor("conv.b").col(0);
  cache.conv_out = cache.conv_pre.cwiseMax(T(0));

  cache.scalars.resize(c.scalars, length);
  for (int l = 0; l < length; ++l) {
    for (int s = 0; s < c.scalars; ++s) {
      cache.scalars(s, l) = static_cast<T>(scalars[static_cast<std::size_t>(l * c.scalars + s)]);
    }
  }

  const Eigen::Map<const Mat<T>> features(cache.conv_out.data(), c.conv_features(), length);
  const Mat<T>* input = nullptr;
  for (std::size_t i = 0; i < c.mlp.size(); ++i) {
    const auto w = tensor("mlp" + std::to_string(i) + ".w");
    const auto b = tensor("mlp" + std::to_string(i) + ".b");
    Mat<T> pre;
    if (i == 0) {
      pre = w.leftCols(c.conv_features()) * features;
      if (c.scalars > 0) pre.noalias() += w.rightCols(c.scalars) * cache.scalars;
    } else {
      pre = w * *input;
    }
    pre.colwise() += b.col(0);
    cache.mlp_pre.push_back(std::move(pre));
    cache.mlp_out.push_back(cache.mlp_pre.back().cwiseMax(T(0)));
    input = &cache.mlp_out.back();
  }

  const auto lw = tensor("lstm.w");
  const int in = static_cast<int>(input->rows());
  Mat<T> xg = lw.leftCols(in) * *input;
  xg.colwise() += tensor("lstm.b").col(0);
  const auto wh = lw.rightCols(H);

  cache.gates.resize(4 * H, length);
  cache.cells.resize(H, length);
  cache.hidden.resize(H, length);
  cache.prev_cells.resize(H, length);
  cache.prev_hidden.resize(H, length);
  Vec<T> h = initial.hidden, cell = initial.cell;
  Vec<T> g(4 * H);
  for (int l = 0; l < length; ++l) {
    cache.prev_hidden.col(l) = h;
    cache.prev_cells.col(l) = cell;
    g.noalias() = xg.col(l) + wh * h;
    for (int j = 0; j < H; ++j) {
      g(j) = sigmoid(g(j));
      g(H + j) = sigmoid(g(H + j));
      g(2 * H + j) = std::tanh(g(2 * H + j));
      g(3 * H + j) = sigmoid(g(3 * H + j));
      cell(j) = g(H + j) * cell(j) + g(j) * g(2 * H + j);
      h(j) = g(3 * H + j) * std::tanh(cell(j));
    }
    cache.gates.col(l) = g;
    cache.cells.col(l) = cell;
    cache.hidden.col(l) = h;
  }
  out.final_state = {h, cell};

  out.logits = tensor("policy.w") * cache.hidden;
  out.logits.colwise() += tensor("policy.b").col(0);
  const Mat<T> values = tensor("value.w") * cache.hidden;
  out.values = values.row(0).transpose().array() + tensor("value.b")(0, 0);

  if (keep_cache) out.cache = std::move(cache);
  return out;
}

template <typename T>
PolicyOutput<T> PolicyNet<T>::forward(std::span<const float> observation, std::span<const float> scalars,
                                      RecurrentState<T>& state) const {
  auto r = unroll(observation, scalars, 1, state, false);
  state = std::move(r.final_state);
  return {r.logits.col(0), r.values(0)};
}

template <typename T>
void PolicyNet<T>::backward(const UnrollResult<T>& unrolled, const Mat<T>& dlogits, const Vec<T>& dvalues,
                            std::span<T> grads) const {
  const NetConfig& c = config_;
  const UnrollCache<T>& cache = unrolled.cache;
  const int L = cache.length;
  const int H = c.lstm;
  if (L == 0) throw StateError("net: backward needs an unroll with keep_cache");
  if (grads.size() != params_.size()) throw ConfigError("net: gradient buffer size mismatch");
  if (dlogits.rows() != c.actions || dlogits.cols() != L || dvalues.size() != L) {
    throw ConfigError("net: upstream gradient shape mismatch");
  }
  auto grad = [&](const std::string& name) {
    const auto& spec = layout_.find(name);
    return Eigen::Map<Mat<T>>(grads.data() + spec.offset, spec.rows, spec.cols);
  };

  // Heads.
  grad("policy.w").noalias() += dlogits * cache.hidden.transpose();
  grad("policy.b").col(0) += dlogits.rowwise().sum();
  grad("value.w").noalias() += dvalues.transpose() * cache.hidden.transpose();
  grad("value.b")(0, 0) += dvalues.sum();
  Mat<T> dh_out = tensor("policy.w").transpose() * dlogits;
  dh_out.noalias() += tensor("value.w").transpose() * dvalues.transpose();

  // LSTM, backward through time.
  const auto lw = tensor("lstm.w");
  const int in = static_cast<int>(lw.cols()) - H;
  const auto wh = lw.rightCols(H);
  Mat<T> dz(4 * H, L);
  Vec<T> dh_next = Vec<T>::Zero(H), dc_next = Vec<T>::Zero(H);
  for (int l = L - 1; l >= 0; --l) {
    const auto gates = cache.gates.col(l);
    for (int j = 0; j < H; ++j) {
      const T i = gates(j), f = gates(H + j), gg = gates(2 * H + j), o = gates(3 * H + j);
      const T tc = std::tanh(cache.cells(j, l));
      const T dh = dh_out(j, l) + dh_next(j);
      const T dc = dh * o * (T(1) - tc * tc) + dc_next(j);
      dz(j, l) = dc * gg * i * (T(1) - i);
      dz(H + j, l) = dc * cache.prev_cells(j, l) * f * (T(1) - f);
      dz(2 * H + j, l) = dc * i * (T(1) - gg * gg);
      dz(3 * H + j, l) = dh * tc * o * (T(1) - o);
      dc_next(j) = dc * f;
    }
    dh_next.noalias() = wh.transpose() * dz.col(l);
  }
  auto glw = grad("lstm.w");
  const Mat<T>& lstm_in = cache.mlp_out.back();
  glw.leftCols(in).noalias() += dz * lstm_in.transpose();
  glw.rightCols(H).noalias() += dz * cache.prev_hidden.transpose();
  grad("lstm.b").col(0) += dz.rowwise().sum();
  Mat<T> dinput = lw.leftCols(in).transpose() * dz;

  // MLP layers, last to first.
  const Eigen::Map<const Mat<T>> features(cache.conv_out.data(), c.conv_features(), L);
  Mat<T> dfeatures;
  for (int i = static_cast<int>(c.mlp.size()) - 1; i >= 0; --i) {
    const auto idx = static_cast<std::size_t>(i);
    const Mat<T> dpre = dinput.cwiseProduct((cache.mlp_pre[idx].array() > T(0)).template cast<T>().matrix());
    const std::string name = "mlp" + std::to_string(i);
    const auto w = tensor(name + ".w");
    auto gw = grad(name + ".w");
    grad(name + ".b").col(0) += dpre.rowwise().sum();
    if (i > 0) {
      gw.noalias() += dpre * cache.mlp_out[idx - 1].transpose();
      dinput = w.transpose() * dpre;
    } else {
      gw.leftCols(c.conv_features()).noalias() += dpre * features.transpose();
      if (c.scalars > 0) gw.rightCols(c.scalars).noalias() += dpre * cache.scalars.transpose();
      dfeatures = w.leftCols(c.conv_features()).transpose() * dpre;
    }
  }

  // Convolution.
  const Eigen::Map<const Mat<T>> dconv_out(dfeatures.data(), c.conv_channels,
                                           static_cast<Eigen::Index>(c.conv_positions()) * L);
  const Mat<T> dconv_pre = dconv_out.cwiseProduct((cache.conv_pre.array() > T(0)).template cast<T>().matrix());
  grad("conv.w").noalias() += dconv_pre * cache.columns.transpose();
  grad("conv.b").col(0) += dconv_pre.rowwise().sum();
}

template class PolicyNet<float>;
template class PolicyNet<double>;

std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  const double lse = m + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (double& v : out) v = std::exp(v);
  return out;
}

int sample_action(std::span<const double> logits, Rng& rng) {
  if (logits.empty()) throw ConfigError("sample_action: empty logits");
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericError("sample_action: non-finite logit");
  }
  const auto p = softmax(logits);
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left u beyond the final partial sum; take the last positive-mass action.
  for (std::size_t i = p.size(); i-- > 0;) {
    if (p[i] > 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

int sample_action(std::span<const float> logits, Rng& rng) {
  std::vector<double> d(logits.begin(), logits.end());
  return sample_action(std::span<const double>(d), rng);
}

}  // namespace cleanup::net
