#include <doctest.h>

#include <cmath>

#include "cleanup/common/errors.hpp"
#include "cleanup/rl/a2c.hpp"
#include "cleanup/rl/arena.hpp"
#include "cleanup/rl/learner.hpp"
#include "cleanup/rl/population.hpp"
#include "cleanup/rl/rmsprop.hpp"

using namespace cleanup;
using namespace cleanup::rl;

namespace {

net::NetConfig toy() {
  net::NetConfig c;
  c.obs_channels = 2;
  c.obs_size = 5;
  c.conv_channels = 2;
  c.mlp = {5};
  c.lstm = 3;
  c.scalars = 2;
  c.actions = 3;
  return c;
}

Trajectory random_traj(const net::NetConfig& c, int agent, int index, int L, Rng& rng, bool terminal = false) {
  Trajectory t;
  t.id = {0, 0, agent, index};
  t.agent = agent;
  t.length = L;
  for (int i = 0; i < L * c.obs_dim(); ++i) t.observations.push_back(static_cast<float>(rng.bernoulli(0.3)));
  for (int i = 0; i < L * c.scalars; ++i) t.scalars.push_back(static_cast<float>(rng.uniform(0, 2)));
  for (int i = 0; i < L; ++i) {
    t.actions.push_back(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(c.actions))));
    t.extrinsic.push_back(static_cast<float>(rng.bernoulli(0.2)));
    t.intrinsic.push_back(static_cast<float>(-rng.uniform(0, 1)));
    t.rewards.push_back(t.extrinsic.back() + t.intrinsic.back());
  }
  for (int i = 0; i < L * c.actions; ++i) t.behavior_logits.push_back(static_cast<float>(rng.uniform(-1, 1)));
  t.initial_hidden.assign(static_cast<std::size_t>(c.lstm), 0.1f);
  t.initial_cell.assign(static_cast<std::size_t>(c.lstm), -0.1f);
  for (int i = 0; i < c.obs_dim(); ++i) t.bootstrap_observation.push_back(static_cast<float>(rng.bernoulli(0.3)));
  t.bootstrap_scalars.assign(static_cast<std::size_t>(c.scalars), 1.0f);
  t.terminal = terminal;
  return t;
}

// Direct sum form of the V-trace target, written from its definition.
std::vector<double> vtrace_oracle(const std::vector<double>& mu, const std::vector<double>& pi,
                                  const std::vector<double>& r, const std::vector<double>& v, double boot, double g,
                                  double rho_bar, double c_bar) {
  const std::size_t n = r.size();
  std::vector<double> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    double acc = v[s];
    double discount = 1.0, trace = 1.0;
    for (std::size_t t = s; t < n; ++t) {
      const double ratio = std::exp(pi[t] - mu[t]);
      const double next = t + 1 < n ? v[t + 1] : boot;
      acc += discount * trace * std::min(rho_bar, ratio) * (r[t] + g * next - v[t]);
      discount *= g;
      trace *= std::min(c_bar, ratio);
    }
    out[s] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("discounted return") {
  const std::vector<double> r{1, 0, 2};
  const auto g = discounted_return(r, 0.5, 4.0);
  CHECK(g[2] == 2 + 0.5 * 4);
  CHECK(g[1] == 0.5 * 4);
  CHECK(g[0] == 1 + 0.5 * 2);
}

TEST_CASE("on-policy v-trace equals bootstrapped returns") {
  Rng rng(1);
  std::vector<double> lp, r, v;
  for (int i = 0; i < 50; ++i) {
    lp.push_back(-rng.uniform(0.1, 3));
    r.push_back(rng.uniform(-1, 1));
    v.push_back(rng.uniform(-2, 2));
  }
  const auto t = vtrace(lp, lp, r, v, 0.7, 0.99);
  const auto g = discounted_return(r, 0.99, 0.7);
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(std::abs(t.values[i] - g[i]) < 1e-9);
    const double next = i + 1 < r.size() ? t.values[i + 1] : 0.7;
    CHECK(std::abs(t.advantages[i] - (r[i] + 0.99 * next - v[i])) < 1e-9);
  }
}

TEST_CASE("off-policy v-trace matches the sum form") {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> mu, pi, r, v;
    for (int i = 0; i < 30; ++i) {
      mu.push_back(-rng.uniform(0.1, 3));
      pi.push_back(-rng.uniform(0.1, 3));
      r.push_back(rng.uniform(-1, 1));
      v.push_back(rng.uniform(-2, 2));
    }
    const auto t = vtrace(mu, pi, r, v, -0.3, 0.95, 1.0, 1.0);
    const auto o = vtrace_oracle(mu, pi, r, v, -0.3, 0.95, 1.0, 1.0);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(std::abs(t.values[i] - o[i]) < 1e-10);
  }
}

TEST_CASE("segment loss gradient matches central differences") {
  Rng rng(4);
  const int A = 4, L = 6;
  net::Mat<double> logits = net::Mat<double>::Random(A, L);
  net::Vec<double> values = net::Vec<double>::Random(L);
  std::vector<int> actions;
  VTraceTargets targets;
  for (int i = 0; i < L; ++i) {
    actions.push_back(static_cast<int>(rng.uniform_int(A)));
    targets.values.push_back(rng.uniform(-1, 1));
    targets.advantages.push_back(rng.uniform(-1, 1));
  }
  A2cHyper hyper;
  hyper.entropy_cost = 0.05;
  net::Mat<double> dl;
  net::Vec<double> dv;
  segment_loss<double>(logits, values, actions, targets, hyper, &dl, &dv);
  const double h = 1e-6;
  for (int a = 0; a < A; ++a) {
    for (int s = 0; s < L; ++s) {
      auto up = logits, down = logits;
      up(a, s) += h;
      down(a, s) -= h;
      const double fd = (segment_loss<double>(up, values, actions, targets, hyper, nullptr, nullptr).total -
                         segment_loss<double>(down, values, actions, targets, hyper, nullptr, nullptr).total) /
                        (2 * h);
      CHECK(std::abs(fd - dl(a, s)) < 1e-7);
    }
  }
  for (int s = 0; s < L; ++s) {
    auto up = values, down = values;
    up(s) += h;
    down(s) -= h;
    const double fd = (segment_loss<double>(logits, up, actions, targets, hyper, nullptr, nullptr).total -
                       segment_loss<double>(logits, down, actions, targets, hyper, nullptr, nullptr).total) /
                      (2 * h);
    CHECK(std::abs(fd - dv(s)) < 1e-7);
  }
}

TEST_CASE("batch loss parameter gradient matches central differences") {
  const auto cfg = toy();
  net::PolicyNet<double> net(cfg);
  Rng rng(6);
  net.init(rng);
  std::vector<Trajectory> batch{random_traj(cfg, 0, 0, 4, rng), random_traj(cfg, 0, 1, 3, rng, true)};
  A2cHyper hyper;
  hyper.entropy_cost = 0.01;
  std::vector<VTraceTargets> frozen;
  std::vector<double> grads(net.params().size(), 0.0);
  batch_loss<double>(net, batch, hyper, {}, grads, &frozen);
  std::vector<double> g2(net.params().size(), 0.0);
  batch_loss<double>(net, batch, hyper, frozen, g2);
  CHECK(grads == g2);
  double worst = 0;
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    const double keep = net.params()[i];
    const double h = 1e-6;
    net.params()[i] = keep + h;
    const double up = batch_loss<double>(net, batch, hyper, frozen, {}).total;
    net.params()[i] = keep - h;
    const double down = batch_loss<double>(net, batch, hyper, frozen, {}).total;
    net.params()[i] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - grads[i]) / std::max(1.0, std::abs(fd)));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("rmsprop step") {
  std::vector<double> theta{1.0, -2.0}, grad{0.5, -1.0}, acc{0.0, 0.1};
  RmsPropConfig cfg{0.01, 0.9, 1e-5, 0.0};
  rmsprop_step<double>(theta, grad, acc, cfg);
  const double v0 = 0.1 * 0.25, v1 = 0.9 * 0.1 + 0.1 * 1.0;
  CHECK(acc[0] == doctest::Approx(v0).epsilon(1e-15));
  CHECK(acc[1] == doctest::Approx(v1).epsilon(1e-15));
  CHECK(theta[0] == doctest::Approx(1.0 - 0.01 * 0.5 / std::sqrt(v0 + 1e-5)).epsilon(1e-15));
  CHECK(theta[1] == doctest::Approx(-2.0 + 0.01 * 1.0 / std::sqrt(v1 + 1e-5)).epsilon(1e-15));
  std::vector<double> p{0.0}, g{1.0}, a{0.0}, m{0.0};
  RmsPropConfig mc{0.1, 0.0, 0.0, 0.5};
  rmsprop_step<double>(p, g, a, mc, m);
  rmsprop_step<double>(p, g, a, mc, m);
  CHECK(p[0] == doctest::Approx(-(0.1 + 0.05 + 0.1)));
}

TEST_CASE("softmax policy gradient solves a three-armed bandit") {
  Rng rng(12);
  const std::vector<double> means{0.2, 0.5, 1.0};
  std::vector<double> theta(3, 0.0), acc(3, 0.0);
  A2cHyper hyper;
  hyper.entropy_cost = 0.001;
  RmsPropConfig opt{0.01, 0.99, 1e-5, 0.0};
  double baseline = 0.0;
  for (int it = 0; it < 3000; ++it) {
    net::Mat<double> logits = Eigen::Map<net::Vec<double>>(theta.data(), 3);
    const std::vector<double> lp(theta.begin(), theta.end());
    const int a = net::sample_action(std::span<const double>(lp), rng);
    const double r = means[static_cast<std::size_t>(a)] + 0.1 * rng.normal();
    VTraceTargets tg{{r}, {r - baseline}};
    baseline += 0.05 * (r - baseline);
    net::Mat<double> dl;
    net::Vec<double> dv;
    const std::vector<int> actions{a};
    segment_loss<double>(logits, net::Vec<double>::Zero(1), actions, tg, hyper, &dl, &dv);
    const std::vector<double> g(dl.data(), dl.data() + 3);
    rmsprop_step<double>(theta, g, acc, opt);
  }
  CHECK(net::softmax(theta)[2] > 0.9);
}

TEST_CASE("learner applies each segment once and honours its budget") {
  const auto cfg = toy();
  net::PolicyNet<float> net(cfg);
  Rng rng(8);
  net.init(rng);
  A2cHyper hyper;
  hyper.batch_size = 2;
  Learner learner(4, net, {2.7, 0.18}, hyper, 10);
  const auto a = random_traj(cfg, 4, 0, 4, rng);
  const auto b = random_traj(cfg, 4, 1, 4, rng);
  const auto c = random_traj(cfg, 4, 2, 4, rng);
  const auto d = random_traj(cfg, 4, 3, 4, rng);
  const auto before = learner.snapshot();
  CHECK(learner.submit(a) == SubmitResult::queued);
  CHECK(learner.submit(a) == SubmitResult::duplicate);
  CHECK(learner.snapshot() == before);
  CHECK(learner.submit(b) == SubmitResult::updated);
  CHECK(learner.updates() == 1);
  CHECK(learner.snapshot() != before);
  CHECK(learner.submit(c) == SubmitResult::updated);  // reaching the budget flushes
  CHECK(learner.exhausted());
  CHECK(learner.submit(d) == SubmitResult::over_budget);
  CHECK(learner.steps_consumed() == 12);
  CHECK_THROWS_AS(learner.submit(random_traj(cfg, 1, 9, 2, rng)), ConfigError);
  const auto ck = learner.checkpoint(Condition::anonymous);
  CHECK(ck.updates == 2);
  CHECK(ck.params == learner.snapshot());
}

TEST_CASE("retried deliveries are not double counted") {
  const auto cfg = toy();
  net::PolicyNet<float> net(cfg);
  Rng rng(9);
  net.init(rng);
  A2cHyper hyper;
  hyper.batch_size = 100;
  Learner learner(0, net, {2.7, 0.18}, hyper, 1000);
  int calls = 0;
  // Every other delivery lands and then reports a transient failure.
  const SegmentSink flaky = [&](const Trajectory& t) {
    ++calls;
    learner.submit(t);
    if (calls % 2 == 1) throw TransientDeliveryError("ack lost");
  };
  for (int i = 0; i < 5; ++i) deliver_with_retry(flaky, random_traj(cfg, 0, i, 3, rng));
  CHECK(calls == 10);
  CHECK(learner.steps_consumed() == 15);
  const SegmentSink dead = [](const Trajectory&) { throw TransientDeliveryError("down"); };
  CHECK_THROWS_AS(deliver_with_retry(dead, random_traj(cfg, 0, 99, 3, rng), 3), TransientDeliveryError);
}

TEST_CASE("serial training is reproducible from its seed") {
  TrainingSetup setup;
  setup.population = PopulationConfig::desk();
  setup.population.population = 5;
  setup.population.arenas = 2;
  setup.population.eval_groups = 1;
  setup.population.steps_per_agent = 300;
  setup.env.episode_length = 100;
  setup.net.conv_channels = 4;
  setup.net.mlp = {16};
  setup.net.lstm = 8;
  setup.hyper.batch_size = 2;
  setup.seed = 77;
  const auto a = run_training(setup);
  const auto b = run_training(setup);
  REQUIRE(a.checkpoints.size() == 5);
  CHECK(a.checkpoints == b.checkpoints);
  for (const auto& ck : a.checkpoints) CHECK(ck.steps_consumed >= 300);
  setup.seed = 78;
  CHECK(run_training(setup).checkpoints != a.checkpoints);

  EvaluationSetup ev;
  ev.env.episode_length = 50;
  ev.groups = 1;
  ev.episodes = 2;
  ev.seed = 3;
  const auto records = run_evaluation(a.checkpoints, ev);
  REQUIRE(records.size() == 2);
  CHECK(records[0].steps.size() == 50);
  CHECK(records == run_evaluation(a.checkpoints, ev));
}
