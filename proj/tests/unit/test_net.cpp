#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cleanup/common/errors.hpp"
#include "cleanup/net/checkpoint.hpp"
#include "cleanup/net/policy_net.hpp"

using namespace cleanup;
using namespace cleanup::net;

namespace {

NetConfig toy() {
  NetConfig c;
  c.obs_channels = 2;
  c.obs_size = 5;
  c.conv_channels = 3;
  c.kernel = 3;
  c.mlp = {6, 5};
  c.lstm = 4;
  c.scalars = 2;
  c.actions = 3;
  return c;
}

struct Probe {
  std::vector<float> obs, scalars;
  Mat<double> wl;
  Vec<double> wv;
};

Probe make_probe(const NetConfig& c, int L, Rng& rng) {
  Probe p;
  for (int i = 0; i < L * c.obs_dim(); ++i) p.obs.push_back(static_cast<float>(rng.uniform(-1, 1)));
  for (int i = 0; i < L * c.scalars; ++i) p.scalars.push_back(static_cast<float>(rng.uniform(0, 3)));
  p.wl = Mat<double>::Random(c.actions, L);
  p.wv = Vec<double>::Random(L);
  return p;
}

double probe_loss(const PolicyNet<double>& net, const Probe& p, int L) {
  const auto u = net.unroll(p.obs, p.scalars, L, net.initial_state(), false);
  return (u.logits.array() * p.wl.array()).sum() + u.values.dot(p.wv);
}

}  // namespace

TEST_CASE("backward matches central differences") {
  const auto cfg = toy();
  PolicyNet<double> net(cfg);
  Rng rng(17);
  net.init(rng);
  // Non-zero biases so every path is exercised.
  for (auto& w : net.params()) w += rng.uniform(-0.05, 0.05);
  const int L = 4;
  const auto probe = make_probe(cfg, L, rng);
  const auto u = net.unroll(probe.obs, probe.scalars, L, net.initial_state(), true);
  std::vector<double> grads(net.params().size(), 0.0);
  net.backward(u, probe.wl, probe.wv, grads);
  double worst = 0;
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    const double keep = net.params()[i];
    const double h = 1e-6;
    net.params()[i] = keep + h;
    const double up = probe_loss(net, probe, L);
    net.params()[i] = keep - h;
    const double down = probe_loss(net, probe, L);
    net.params()[i] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - grads[i]) / std::max(1.0, std::abs(fd)));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("unroll agrees with repeated forward") {
  const auto cfg = toy();
  PolicyNet<double> net(cfg);
  Rng rng(3);
  net.init(rng);
  const int L = 5;
  const auto probe = make_probe(cfg, L, rng);
  const auto u = net.unroll(probe.obs, probe.scalars, L, net.initial_state(), false);
  auto state = net.initial_state();
  for (int t = 0; t < L; ++t) {
    const std::span<const float> o(probe.obs.data() + t * cfg.obs_dim(), static_cast<std::size_t>(cfg.obs_dim()));
    const std::span<const float> s(probe.scalars.data() + t * cfg.scalars, static_cast<std::size_t>(cfg.scalars));
    const auto out = net.forward(o, s, state);
    CHECK((out.logits - u.logits.col(t)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(out.value - u.values(t)) < 1e-12);
  }
  CHECK((state.hidden - u.final_state.hidden).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("softmax and sampling") {
  const std::vector<double> logits{1.0, 2.0, 3.0};
  const auto p = softmax(logits);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(p[2] == doctest::Approx(std::exp(3.0) / z).epsilon(1e-14));
  const auto lp = log_softmax(logits);
  CHECK(lp[0] == doctest::Approx(1.0 - std::log(z)).epsilon(1e-14));
  const std::vector<double> big{1000.0, 0.0, -1000.0};
  CHECK(softmax(big)[0] == 1.0);
  Rng rng(1);
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 30000; ++i) ++counts[static_cast<std::size_t>(sample_action(logits, rng))];
  CHECK(std::abs(counts[2] / 30000.0 - p[2]) < 0.015);
  const std::vector<double> bad{0.0, std::nan("")};
  CHECK_THROWS_AS(sample_action(bad, rng), NumericError);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "cleanup_test_ckpt";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  PolicyNet<float> net(toy());
  Rng rng(5);
  net.init(rng);
  Checkpoint ck;
  ck.agent_id = 3;
  ck.condition = "anonymous";
  ck.reputation = {2.5, 0.17};
  ck.net = toy();
  ck.steps_consumed = 1234;
  ck.updates = 12;
  ck.params.assign(net.params().begin(), net.params().end());
  ck.accumulators.assign(net.params().size(), 0.25f);
  save_checkpoint(dir / "agent_3.ckpt", ck);
  const auto back = load_checkpoint(dir / "agent_3.ckpt");
  CHECK(back == ck);
  const auto all = load_checkpoint_dir(dir);
  REQUIRE(all.size() == 1);
  CHECK(all[0].agent_id == 3);
  // A truncated file is detected.
  std::filesystem::resize_file(dir / "agent_3.ckpt", 40);
  CHECK_THROWS_AS(load_checkpoint(dir / "agent_3.ckpt"), CorruptionError);
  std::filesystem::remove_all(dir);
}
