#include <CLI11.hpp>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cleanup/common/errors.hpp"
#include "cleanup/common/rng.hpp"
#include "cleanup/env/episode_record.hpp"
#include "cleanup/env/game.hpp"
#include "cleanup/env/scripted_bots.hpp"
#include "cleanup/io/record_io.hpp"
#include "cleanup/io/replay.hpp"
#include "cleanup/metrics/dilemma.hpp"
#include "cleanup/metrics/jenks.hpp"
#include "cleanup/metrics/spatial.hpp"
#include "cleanup/metrics/temporal.hpp"
#include "cleanup/net/policy_net.hpp"
#include "cleanup/reputation/reputation.hpp"
#include "cleanup/rl/a2c.hpp"
#include "cleanup/rl/population.hpp"
#include "cleanup/server/session.hpp"
#include "cleanup/stats/anova.hpp"
#include "cleanup/stats/distributions.hpp"
#include "cleanup/stats/regression.hpp"
#include "cleanup/stats/tests.hpp"

using namespace cleanup;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict = Verdict::pass;
  std::string detail;
};

// Accumulates sub-checks; the first failure is kept for the summary line.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failure_.empty()) failure_ = what;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  Outcome outcome() const {
    if (!failure_.empty()) return {Verdict::fail, failure_};
    return {Verdict::pass, std::to_string(count_) + " checks" + (notes_.empty() ? "" : "; " + notes_)};
  }

 private:
  int count_ = 0;
  std::string failure_;
  std::string notes_;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double rel_err(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

// ---------------------------------------------------------------- env-statistics

struct Wilson {
  double lo, hi;
};

Wilson wilson99(long long hits, long long n) {
  const double z = 2.5758293035489004;
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  const double nn = static_cast<double>(n);
  const double denom = 1 + z * z / nn;
  const double centre = (p + z * z / (2 * nn)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / denom;
  return {centre - half, centre + half};
}

// Production functions written out independently of the library.
double expected_apple(double f, const env::EnvConfig& c) {
  double p = c.pr_apple * (c.h_depletion - f) / (c.h_depletion - c.h_abundance);
  if (p < 0) p = 0;
  if (p > c.pr_apple) p = c.pr_apple;
  return p;
}

double expected_pollution(double f, const env::EnvConfig& c) { return f < c.h_depletion ? c.pr_pollution : 0.0; }

Outcome env_statistics() {
  Checks ch;
  const auto map = env::GridMap::default_map();
  for (const bool human : {false, true}) {
    env::EnvConfig cfg = human ? env::EnvConfig::human_paper() : env::EnvConfig::agent_paper();
    cfg.initial_mode = env::InitialMode::evaluation_start;
    const env::CleanupGame game(cfg, map);
    const std::string tag = human ? "human" : "agent";
    // Pinned fractions straddle both thresholds.
    const std::vector<double> fractions{0.0, cfg.h_abundance, 0.5 * (cfg.h_abundance + cfg.h_depletion),
                                        cfg.h_depletion - 0.01, cfg.h_depletion, 0.9};
    auto base = game.reset(derive_seed(human ? 2 : 1, "acceptance-env"));
    // Park every avatar off the orchard so each orchard cell is eligible.
    for (std::size_t i = 0; i < base.avatars.size(); ++i) base.avatars[i].pos = map->spawn_cells()[i];
    std::fill(base.apples.begin(), base.apples.end(), 0);
    base.apple_count = 0;
    std::fill(base.polluted.begin(), base.polluted.end(), 0);
    base.polluted_count = 0;

    const long long orchard = static_cast<long long>(map->orchard_cells().size());
    const int apple_calls = 3000;
    const int pollution_calls = 200'000;
    long long apple_cells = 0, pollution_steps = 0;
    auto state = base;
    for (double f : fractions) {
      long long grown = 0;
      for (int k = 0; k < apple_calls; ++k) {
        grown += game.regrow_apples(state, f);
        std::fill(state.apples.begin(), state.apples.end(), 0);
        state.apple_count = 0;
      }
      const long long n_apple = orchard * apple_calls;
      apple_cells += n_apple;
      const double pa = expected_apple(f, cfg);
      if (pa == 0.0) {
        ch.expect(grown == 0, tag + " apples at F=" + fmt(f) + ": " + std::to_string(grown) + " regrew, expected none");
      } else {
        const auto ci = wilson99(grown, n_apple);
        ch.expect(ci.lo <= pa && pa <= ci.hi, tag + " apples at F=" + fmt(f) + ": rate " +
                                                  fmt(double(grown) / double(n_apple)) + " vs " + fmt(pa));
      }

      long long spawned = 0;
      for (int k = 0; k < pollution_calls; ++k) {
        if (game.spawn_pollution(state, f)) {
          ++spawned;
          std::fill(state.polluted.begin(), state.polluted.end(), 0);
          state.polluted_count = 0;
        }
      }
      pollution_steps += pollution_calls;
      const double pp = expected_pollution(f, cfg);
      if (pp == 0.0) {
        ch.expect(spawned == 0, tag + " pollution at F=" + fmt(f) + ": spawned " + std::to_string(spawned));
      } else {
        const auto ci = wilson99(spawned, pollution_calls);
        ch.expect(ci.lo <= pp && pp <= ci.hi, tag + " pollution at F=" + fmt(f) + ": rate " +
                                                  fmt(double(spawned) / pollution_calls) + " vs " + fmt(pp));
      }
    }
    ch.expect(apple_cells >= 1'000'000 && pollution_steps >= 1'000'000, tag + ": fewer than 10^6 cell-steps");
    ch.note(tag + " " + std::to_string(apple_cells) + " orchard + " + std::to_string(pollution_steps) + " river draws");
  }
  return ch.outcome();
}

// ---------------------------------------------------------------- reward-arithmetic

double oracle_intrinsic(double self, double bar, double alpha, double beta) {
  return -alpha * std::max(0.0, bar - self) - beta * std::max(0.0, self - bar);
}

Outcome reward_arithmetic() {
  Checks ch;
  Rng rng(4242);
  const int players = kGroupSize;
  std::vector<Pos> spread;
  for (int i = 0; i < players; ++i) spread.push_back({i * 3, 0});
  double worst = 0;
  for (int c = 0; c < 1000; ++c) {
    const double lambda = rng.uniform(0.5, 0.999);
    const auto params = reputation::sample_params(rng);
    reputation::ContributionTracker tracker(players, lambda);
    std::vector<double> oracle(static_cast<std::size_t>(players), 0.0);
    const int steps = 1 + static_cast<int>(rng.uniform_int(200));
    const int observer = static_cast<int>(rng.uniform_int(players));
    for (int t = 0; t < steps; ++t) {
      std::vector<std::uint8_t> q;
      for (int i = 0; i < players; ++i) q.push_back(rng.bernoulli(0.3) ? 1 : 0);
      tracker.update(q, spread, observer, Condition::identifiable);
      for (int i = 0; i < players; ++i) {
        auto& o = oracle[static_cast<std::size_t>(i)];
        o = lambda * o + q[static_cast<std::size_t>(i)];
      }
    }
    double others = 0;
    for (int i = 0; i < players; ++i) {
      worst = std::max(worst, std::abs(tracker.trace(i) - oracle[static_cast<std::size_t>(i)]));
      if (i != observer) others += oracle[static_cast<std::size_t>(i)];
    }
    const double bar = others / (players - 1);
    worst = std::max(worst, std::abs(tracker.group_mean(observer) - bar));
    const double self = oracle[static_cast<std::size_t>(observer)];
    const double got = reputation::intrinsic_reward(tracker.trace(observer), tracker.group_mean(observer), params);
    worst = std::max(worst, std::abs(got - oracle_intrinsic(self, bar, params.alpha, params.beta)));
    // Direct cases away from any trace history.
    const double a = rng.uniform(0, 40), b = rng.uniform(0, 40);
    worst = std::max(worst, std::abs(reputation::intrinsic_reward(a, b, params) -
                                     oracle_intrinsic(a, b, params.alpha, params.beta)));
  }
  ch.expect(worst <= 1e-12, "fuzzed trace/intrinsic error " + fmt(worst));

  reputation::ContributionTracker steady(1, 0.97);
  const std::vector<std::uint8_t> one{1};
  const std::vector<Pos> origin{{0, 0}};
  for (int t = 0; t < 5000; ++t) steady.update(one, origin, 0, Condition::identifiable);
  const double limit = 1.0 / (1.0 - 0.97);
  ch.expect(std::abs(steady.trace(0) - limit) <= 1e-12, "steady state " + fmt(steady.trace(0), 15));
  ch.note("max error " + fmt(worst, 3) + ", steady state " + fmt(steady.trace(0), 12));
  return ch.outcome();
}

// ---------------------------------------------------------------- learner-numerics

net::NetConfig toy_net(int actions = 3) {
  net::NetConfig c;
  c.obs_channels = 2;
  c.obs_size = 5;
  c.conv_channels = 2;
  c.mlp = {5};
  c.lstm = 3;
  c.scalars = 2;
  c.actions = actions;
  return c;
}

rl::Trajectory random_traj(const net::NetConfig& c, int index, int L, Rng& rng, bool terminal) {
  rl::Trajectory t;
  t.id = {0, 0, 0, index};
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
  t.initial_hidden.assign(static_cast<std::size_t>(c.lstm), 0.2f);
  t.initial_cell.assign(static_cast<std::size_t>(c.lstm), -0.1f);
  for (int i = 0; i < c.obs_dim(); ++i) t.bootstrap_observation.push_back(static_cast<float>(rng.bernoulli(0.3)));
  t.bootstrap_scalars.assign(static_cast<std::size_t>(c.scalars), 0.5f);
  t.terminal = terminal;
  return t;
}

Outcome learner_numerics() {
  Checks ch;
  // (a) identical behaviour and target policies.
  Rng rng(31);
  double worst_a = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform_int(100));
    std::vector<double> lp, r, v;
    for (int i = 0; i < n; ++i) {
      lp.push_back(-rng.uniform(0.01, 4));
      r.push_back(rng.uniform(-2, 2));
      v.push_back(rng.uniform(-5, 5));
    }
    const double boot = rng.uniform(-5, 5), gamma = rng.uniform(0.9, 0.999);
    const auto t = rl::vtrace(lp, lp, r, v, boot, gamma);
    double g = boot;
    for (int i = n - 1; i >= 0; --i) {
      g = r[static_cast<std::size_t>(i)] + gamma * g;
      worst_a = std::max(worst_a, std::abs(t.values[static_cast<std::size_t>(i)] - g));
    }
  }
  ch.expect(worst_a <= 1e-6, "(a) vtrace vs returns " + fmt(worst_a));

  // (b) full loss through the network against central differences.
  const auto cfg = toy_net();
  net::PolicyNet<double> dnet(cfg);
  dnet.init(rng);
  // Off the ReLU kinks of the zero-bias init.
  for (auto& p : dnet.params()) p += rng.uniform(-0.1, 0.1);
  std::vector<rl::Trajectory> batch{random_traj(cfg, 0, 5, rng, false), random_traj(cfg, 1, 3, rng, true)};
  rl::A2cHyper hyper;
  hyper.entropy_cost = 0.01;
  std::vector<rl::VTraceTargets> frozen;
  std::vector<double> grads(dnet.params().size(), 0.0);
  rl::batch_loss<double>(dnet, batch, hyper, {}, grads, &frozen);
  double worst_b = 0;
  for (std::size_t i = 0; i < dnet.params().size(); ++i) {
    const double keep = dnet.params()[i];
    const double h = 1e-5;
    dnet.params()[i] = keep + h;
    const double up = rl::batch_loss<double>(dnet, batch, hyper, frozen, {}).total;
    dnet.params()[i] = keep - h;
    const double down = rl::batch_loss<double>(dnet, batch, hyper, frozen, {}).total;
    dnet.params()[i] = keep;
    const double fd = (up - down) / (2 * h);
    worst_b = std::max(worst_b, std::abs(fd - grads[i]) / std::max(1e-3, std::max(std::abs(fd), std::abs(grads[i]))));
  }
  ch.expect(worst_b < 1e-4, "(b) gradient relative error " + fmt(worst_b));

  // (c) three-armed bandit through the production update on a float net.
  const std::vector<double> pay{0.2, 0.5, 0.8};
  net::PolicyNet<float> fnet(cfg);
  Rng brng(5);
  fnet.init(brng);
  std::vector<float> acc(fnet.params().size(), 0.0f), mom(fnet.params().size(), 0.0f);
  rl::A2cHyper bh;
  bh.learning_rate = 0.003;
  const std::vector<float> obs(static_cast<std::size_t>(cfg.obs_dim()), 1.0f);
  const std::vector<float> sc(static_cast<std::size_t>(cfg.scalars), 0.0f);
  const auto best_prob = [&] {
    auto st = fnet.initial_state();
    const auto out = fnet.forward(obs, sc, st);
    std::vector<double> l(out.logits.data(), out.logits.data() + out.logits.size());
    return net::softmax(l)[2];
  };
  int converged_at = -1;
  const int batch_size = 4;
  for (int u = 1; u <= 5000 && converged_at < 0; ++u) {
    auto st = fnet.initial_state();
    const auto out = fnet.forward(obs, sc, st);
    std::vector<rl::Trajectory> b;
    for (int k = 0; k < batch_size; ++k) {
      rl::Trajectory t;
      t.id = {0, static_cast<std::uint64_t>(u), 0, k};
      t.length = 1;
      t.observations = obs;
      t.scalars = sc;
      t.behavior_logits.assign(out.logits.data(), out.logits.data() + out.logits.size());
      const int a = net::sample_action(std::span<const float>(t.behavior_logits), brng);
      const float r = brng.bernoulli(pay[static_cast<std::size_t>(a)]) ? 1.0f : 0.0f;
      t.actions = {a};
      t.rewards = {r};
      t.extrinsic = {r};
      t.intrinsic = {0.0f};
      t.initial_hidden.assign(static_cast<std::size_t>(cfg.lstm), 0.0f);
      t.initial_cell.assign(static_cast<std::size_t>(cfg.lstm), 0.0f);
      t.bootstrap_observation = obs;
      t.bootstrap_scalars = sc;
      t.terminal = true;
      b.push_back(std::move(t));
    }
    rl::a2c_update(fnet, acc, mom, b, bh);
    if (best_prob() > 0.95) converged_at = u;
  }
  ch.expect(converged_at > 0, "(c) P(best) after 5000 updates " + fmt(best_prob()));
  ch.note("vtrace err " + fmt(worst_a, 3) + ", grad rel err " + fmt(worst_b, 3) + ", bandit P(best)>0.95 at update " +
          std::to_string(converged_at));
  return ch.outcome();
}

// ---------------------------------------------------------------- metric-oracles

double within_ss(const std::vector<double>& v, unsigned mask) {
  double s[2] = {0, 0}, q[2] = {0, 0};
  int n[2] = {0, 0};
  for (std::size_t i = 0; i < v.size(); ++i) {
    const int c = (mask >> i) & 1u;
    s[c] += v[i];
    q[c] += v[i] * v[i];
    ++n[c];
  }
  if (n[0] == 0 || n[1] == 0) return std::numeric_limits<double>::infinity();
  return q[0] - s[0] * s[0] / n[0] + q[1] - s[1] * s[1] / n[1];
}

Outcome metric_oracles() {
  Checks ch;
  const std::vector<int> hog{3, 3, 3, 3, 3, 3, 3};
  const std::vector<int> rota{0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 0, 1, 2, 3, 4};
  ch.expect(metrics::turn_taking_score(hog) == 0.0, "turn-taking of one member hogging");
  ch.expect(metrics::turn_taking_score(rota) == 1.0, "turn-taking of a full rota");

  metrics::PresenceMatrix disjoint;
  disjoint.group_size = kGroupSize;
  for (int m = 0; m < kGroupSize; ++m) {
    for (int k = 0; k < 3; ++k) {
      disjoint.locations.push_back({m, k});
      disjoint.members.push_back({m});
    }
  }
  const auto d = metrics::territoriality(disjoint);
  ch.expect(d && d->normalized == 1.0, "territoriality of disjoint territories");
  metrics::PresenceMatrix shared;
  shared.group_size = kGroupSize;
  for (int k = 0; k < 10; ++k) {
    shared.locations.push_back({k, 0});
    shared.members.push_back({0, 1, 2, 3, 4});
  }
  const auto s = metrics::territoriality(shared);
  ch.expect(s && std::abs(s->normalized - 0.2) < 1e-15, "territoriality of 10 shared cells");

  const std::vector<double> flat(10, 4.0);
  std::vector<double> spike(10, 0.0);
  spike[7] = 12.0;
  ch.expect(metrics::consistency(flat).score == 1.0, "consistency of equal bins");
  ch.expect(std::abs(metrics::consistency(spike).score - 0.1) < 1e-15, "consistency of a single bin");

  Rng rng(99);
  int cases = 0;
  for (int rep = 0; rep < 3000; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform_int(11));
    std::vector<double> v;
    const bool coarse = rng.bernoulli(0.5);
    for (int i = 0; i < n; ++i) v.push_back(coarse ? std::round(rng.uniform(0, 6)) : rng.uniform(-50, 50));
    if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; })) continue;
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) best = std::min(best, within_ss(v, mask));
    const auto j = metrics::jenks_two_class(v);
    unsigned upper = 0;
    for (int i = 0; i < n; ++i) upper |= (v[static_cast<std::size_t>(i)] >= j.threshold ? 1u : 0u) << i;
    ch.expect(std::abs(j.within_ss - best) <= 1e-9 * std::max(1.0, best) &&
                  std::abs(within_ss(v, upper) - best) <= 1e-9 * std::max(1.0, best),
              "jenks differs from exhaustive labelling on n=" + std::to_string(n));
    ++cases;
  }
  ch.note(std::to_string(cases) + " jenks inputs");
  return ch.outcome();
}

// ---------------------------------------------------------------- statistics-oracles

double ols_rss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  // Normal equations.
  const Eigen::VectorXd b = (X.transpose() * X).ldlt().solve(X.transpose() * y);
  return (y - X * b).squaredNorm();
}

std::vector<stats::LongObservation> rm_design(int G, int E, double effect, double task_effect, Rng& rng) {
  std::vector<stats::LongObservation> d;
  for (int g = 0; g < G; ++g) {
    const double offset = 2 * rng.normal();
    for (int c = 0; c < 2; ++c) {
      const int task = (g % 2 == 0) == (c == 0) ? 1 : 2;
      for (int e = 0; e < E; ++e) {
        const double v = 5 + offset + (c == 0 ? effect : 0) + (task == 2 ? task_effect : 0) + rng.normal();
        d.push_back({g, c == 0 ? Condition::identifiable : Condition::anonymous, task, e, v});
      }
    }
  }
  return d;
}

std::vector<double> normals(Rng& rng, int n, double mu = 0, double sd = 1) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(mu + sd * rng.normal());
  return v;
}

Outcome statistics_oracles() {
  Checks ch;
  const double tol = 1e-8;
  Rng rng(2024);
  const auto close = [&](double got, double want, const std::string& what) {
    ch.expect(rel_err(got, want) <= tol, what + ": " + fmt(got, 15) + " vs " + fmt(want, 15));
  };

  for (int rep = 0; rep < 20; ++rep) {
    // Welch.
    const auto a = normals(rng, 8 + rep, 1.0, 2.0), b = normals(rng, 15, 0.0, 0.7);
    const double na = double(a.size()), nb = double(b.size());
    double ma = 0, mb = 0, va = 0, vb = 0;
    for (double x : a) ma += x / na;
    for (double x : b) mb += x / nb;
    for (double x : a) va += (x - ma) * (x - ma) / (na - 1);
    for (double x : b) vb += (x - mb) * (x - mb) / (nb - 1);
    const double sa = va / na, sb = vb / nb;
    const double t = (ma - mb) / std::sqrt(sa + sb);
    const double df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1) + sb * sb / (nb - 1));
    const auto w = stats::welch_t(a, b, stats::Alternative::two_sided);
    close(w.statistic, t, "welch t");
    close(w.df1, df, "welch df");
    close(w.p, 2 * stats::student_t_sf(std::abs(t), df), "welch p");

    // Paired.
    const auto pa = normals(rng, 12), pb = normals(rng, 12, 0.3);
    double md = 0, vd = 0;
    for (std::size_t i = 0; i < pa.size(); ++i) md += (pa[i] - pb[i]) / 12.0;
    for (std::size_t i = 0; i < pa.size(); ++i) vd += (pa[i] - pb[i] - md) * (pa[i] - pb[i] - md) / 11.0;
    const double tp = md / std::sqrt(vd / 12.0);
    const auto p = stats::paired_t(pa, pb);
    close(p.statistic, tp, "paired t");
    close(p.p, 2 * stats::student_t_sf(std::abs(tp), 11), "paired p");

    // Fisher over two p values: chi-square with 4 df has survival exp(-x/2)(1 + x/2).
    const std::vector<double> ps{rng.uniform(1e-6, 1), rng.uniform(1e-6, 1)};
    const double x = -2 * (std::log(ps[0]) + std::log(ps[1]));
    const auto f = stats::fisher_combine(ps);
    close(f.statistic, x, "fisher statistic");
    close(f.p, std::exp(-x / 2) * (1 + x / 2), "fisher p");

    // Simple regression.
    const int n = 30;
    std::vector<double> xs, ys;
    for (int i = 0; i < n; ++i) {
      xs.push_back(rng.uniform(0, 10));
      ys.push_back(1.5 - 0.4 * xs.back() + rng.normal());
    }
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) mx += xs[static_cast<std::size_t>(i)] / n, my += ys[static_cast<std::size_t>(i)] / n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
      sxx += (xs[static_cast<std::size_t>(i)] - mx) * (xs[static_cast<std::size_t>(i)] - mx);
      sxy += (xs[static_cast<std::size_t>(i)] - mx) * (ys[static_cast<std::size_t>(i)] - my);
    }
    const double slope = sxy / sxx, icept = my - slope * mx;
    double rss = 0;
    for (int i = 0; i < n; ++i) {
      const double e = ys[static_cast<std::size_t>(i)] - icept - slope * xs[static_cast<std::size_t>(i)];
      rss += e * e;
    }
    const double se = std::sqrt(rss / (n - 2) / sxx);
    const auto reg = stats::ols_regression(ys, xs);
    close(reg.slope.estimate, slope, "regression slope");
    close(reg.intercept.estimate, icept, "regression intercept");
    close(reg.slope.statistic, slope / se, "regression t");
    close(reg.slope.p, 2 * stats::student_t_sf(std::abs(slope / se), n - 2), "regression p");
  }

  // Repeated-measures ANOVA against nested least squares.
  for (int rep = 0; rep < 5; ++rep) {
    const int G = 24, E = 7;
    const auto d = rm_design(G, E, 0.2 * rep, 0.3, rng);
    const int N = static_cast<int>(d.size());
    Eigen::MatrixXd groups = Eigen::MatrixXd::Zero(N, G);
    Eigen::VectorXd cond(N), task(N), y(N);
    for (int i = 0; i < N; ++i) {
      const auto& o = d[static_cast<std::size_t>(i)];
      groups(i, o.group) = 1;
      cond(i) = o.condition == Condition::identifiable;
      task(i) = o.task == 2;
      y(i) = o.value;
    }
    Eigen::MatrixXd g_c(N, G + 1), g_t(N, G + 1), g_ct(N, G + 2);
    g_c << groups, cond;
    g_t << groups, task;
    g_ct << groups, cond, task;
    const double r_g = ols_rss(groups, y), r_c = ols_rss(g_c, y);
    const double f1 = (r_g - r_c) / (r_c / (N - G - 1));
    const auto one = stats::rm_anova_oneway(d);
    close(one.statistic, f1, "one-way F");
    close(one.df2, N - G - 1, "one-way df");
    close(one.p, stats::f_sf(f1, 1, N - G - 1), "one-way p");

    const double r_ct = ols_rss(g_ct, y), df2 = N - G - 2;
    const auto two = stats::rm_anova_twoway(d);
    close(two.condition.statistic, (ols_rss(g_t, y) - r_ct) / (r_ct / df2), "two-way condition F");
    close(two.task.statistic, (ols_rss(g_c, y) - r_ct) / (r_ct / df2), "two-way task F");
    close(two.condition.df2, df2, "two-way df");
    // Interaction: between-group comparison of the two orders on group means.
    Eigen::VectorXd gm = Eigen::VectorXd::Zero(G), order(G);
    for (const auto& o : d) gm(o.group) += o.value / (2 * E);
    for (int g = 0; g < G; ++g) order(g) = g % 2;
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(G, 1), full(G, 2);
    full << ones, order;
    const double r_full = ols_rss(full, gm);
    const double fi = (ols_rss(ones, gm) - r_full) / (r_full / (G - 2));
    close(two.interaction.statistic, fi, "interaction F");
    close(two.interaction.df2, G - 2, "interaction df");
  }

  // Mediation with a planted indirect effect of 2 x 3.
  {
    std::vector<double> x, m, y;
    for (int i = 0; i < 2000; ++i) {
      const double xi = rng.bernoulli(0.5);
      const double mi = 2 * xi + 0.1 * rng.normal();
      x.push_back(xi);
      m.push_back(mi);
      y.push_back(3 * mi + xi + 0.1 * rng.normal());
    }
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd X1(n, 2), X2(n, 3);
    Eigen::VectorXd vm(n), vy(n);
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      X1.row(i) << 1, x[k];
      X2.row(i) << 1, x[k], m[k];
      vm(i) = m[k];
      vy(i) = y[k];
    }
    const Eigen::VectorXd ba = (X1.transpose() * X1).ldlt().solve(X1.transpose() * vm);
    const Eigen::VectorXd bc = (X1.transpose() * X1).ldlt().solve(X1.transpose() * vy);
    const Eigen::VectorXd bb = (X2.transpose() * X2).ldlt().solve(X2.transpose() * vy);
    const auto med = stats::mediation(x, m, y, 1000, 17);
    close(med.a, ba(1), "mediation a");
    close(med.c, bc(1), "mediation c");
    close(med.b, bb(2), "mediation b");
    close(med.c_prime, bb(1), "mediation c'");
    close(med.c, med.c_prime + med.a * med.b, "C = C' + AB");
    ch.expect(std::abs(med.a * med.b - 6.0) <= 0.1, "planted AB recovered as " + fmt(med.a * med.b));
    ch.note("AB = " + fmt(med.a * med.b, 5));
  }

  // Null calibration: p values under H0 should be uniform.
  const int reps = 500;
  std::vector<double> pw, pp, pa, pr;
  for (int r = 0; r < reps; ++r) {
    pw.push_back(stats::welch_t(normals(rng, 12, 0, 1), normals(rng, 20, 0, 3), stats::Alternative::two_sided).p);
    pp.push_back(stats::paired_t(normals(rng, 15), normals(rng, 15)).p);
    pa.push_back(stats::rm_anova_oneway(rm_design(24, 7, 0.0, 0.0, rng)).p);
    std::vector<double> xs, ys;
    for (int i = 0; i < 25; ++i) {
      xs.push_back(rng.uniform(0, 1));
      ys.push_back(rng.normal());
    }
    pr.push_back(stats::ols_regression(ys, xs).slope.p);
  }
  for (const auto& [name, ps] : std::vector<std::pair<std::string, std::vector<double>*>>{
           {"welch", &pw}, {"paired", &pp}, {"anova", &pa}, {"regression", &pr}}) {
    const auto ks = stats::ks_uniform(*ps);
    ch.expect(ks.p > 0.01, "null calibration of " + name + ": KS p = " + fmt(ks.p));
    ch.note(name + " KS p=" + fmt(ks.p, 3));
  }
  return ch.outcome();
}

// ---------------------------------------------------------------- social-dilemma

Outcome social_dilemma() {
  Checks ch;
  auto cfg = env::EnvConfig::human_paper();
  cfg.initial_mode = env::InitialMode::evaluation_start;
  const env::CleanupGame game(cfg, env::GridMap::default_map());
  const auto records = env::scripted_corpus(game, 200, 11, Condition::identifiable, env::BotMix::mixed, "human-paper");
  std::vector<metrics::GroupObservation> groups;
  std::vector<double> all;
  for (const auto& r : records) {
    groups.push_back(metrics::group_observation(r));
    all.insert(all.end(), groups.back().contributions.begin(), groups.back().contributions.end());
  }
  const auto brk = metrics::jenks_two_class(all);
  std::vector<metrics::ClassifiedEpisode> classified;
  for (const auto& g : groups) classified.push_back(metrics::classify(g.contributions, g.payoffs, brk.threshold));
  const auto table = metrics::schelling_table(classified, cfg.num_players);
  const auto cond = metrics::dilemma_conditions(table);
  const auto sig = [&](const std::optional<stats::TestResult>& t, const std::string& name) {
    ch.expect(t.has_value() && t->p < 0.01, "condition " + name + (t ? " p = " + fmt(t->p) : " untestable"));
  };
  sig(cond.c1, "1");
  sig(cond.c2, "2");
  sig(cond.c3b, "3b");
  ch.expect(cond.p_overall && *cond.p_overall < 0.01,
            "p_overall " + (cond.p_overall ? fmt(*cond.p_overall) : std::string("undefined")));
  const auto reg = metrics::dilemma_regressions(groups);
  ch.expect(reg.individual.slope.estimate < 0, "individual slope " + fmt(reg.individual.slope.estimate));
  ch.expect(reg.group.slope.estimate > 0, "group slope " + fmt(reg.group.slope.estimate));
  ch.note("threshold " + fmt(brk.threshold, 4) + ", p_overall " + fmt(cond.p_overall.value_or(stats::kNaN), 3) +
          ", slopes " + fmt(reg.individual.slope.estimate, 4) + " / " + fmt(reg.group.slope.estimate, 4));
  return ch.outcome();
}

// ---------------------------------------------------------------- canonical-oracle

Outcome canonical_oracle() {
  Checks ch;
  const int n = 4;
  const double e = 20, M = 1.6;
  Rng rng(8);
  std::vector<metrics::GroupObservation> groups;
  double worst = 0;
  for (int g = 0; g < 100; ++g) {
    metrics::GroupObservation o;
    double total = 0;
    for (int i = 0; i < n; ++i) {
      o.contributions.push_back(std::round(rng.uniform(0, e)));
      total += o.contributions.back();
    }
    const auto pay = metrics::canonical_payoffs(o.contributions, e, M);
    for (int i = 0; i < n; ++i) {
      const double want = e - o.contributions[static_cast<std::size_t>(i)] + M / n * total;
      worst = std::max(worst, std::abs(pay.payoffs[static_cast<std::size_t>(i)] - want));
    }
    worst = std::max(worst, std::abs(pay.total - (n * e + (M - 1) * total)));
    o.payoffs = pay.payoffs;
    groups.push_back(o);
  }
  ch.expect(worst <= 1e-12, "payoff arithmetic error " + fmt(worst));
  const auto reg = metrics::dilemma_regressions(groups);
  ch.expect(std::abs(reg.individual.slope.estimate + 1.0) <= 1e-9,
            "individual slope " + fmt(reg.individual.slope.estimate, 15));
  ch.expect(std::abs(reg.group.slope.estimate - (M - 1)) <= 1e-9, "group slope " + fmt(reg.group.slope.estimate, 15));
  ch.note("slopes " + fmt(reg.individual.slope.estimate, 12) + " / " + fmt(reg.group.slope.estimate, 12));
  return ch.outcome();
}

// ---------------------------------------------------------------- directional-training

struct DirectionalOptions {
  bool long_run = false;
  std::int64_t steps = 2'000'000;
  int seeds = 3;
};

struct ConditionMeans {
  double contribution = 0;
  double collective = 0;
};

ConditionMeans evaluate(const std::vector<env::EpisodeRecord>& records) {
  ConditionMeans m;
  for (const auto& r : records) {
    const auto t = env::totals(r);
    m.contribution += std::accumulate(t.contribution_steps.begin(), t.contribution_steps.end(), 0.0);
    m.collective += std::accumulate(t.extrinsic.begin(), t.extrinsic.end(), 0.0);
  }
  m.contribution /= static_cast<double>(records.size());
  m.collective /= static_cast<double>(records.size());
  return m;
}

Outcome directional_training(const DirectionalOptions& opt) {
  if (!opt.long_run) return {Verdict::skip, "long-running; run with --long"};
  Checks ch;
  ConditionMeans pooled[2];
  for (int s = 0; s < opt.seeds; ++s) {
    ConditionMeans per[2];
    for (int c = 0; c < 2; ++c) {
      const Condition condition = c == 0 ? Condition::identifiable : Condition::anonymous;
      rl::TrainingSetup setup;
      setup.population = rl::PopulationConfig::desk();
      setup.population.steps_per_agent = opt.steps;
      setup.condition = condition;
      setup.seed = derive_seed(1000 + static_cast<std::uint64_t>(s), "directional");
      const auto trained = rl::run_training(setup);
      rl::EvaluationSetup ev;
      ev.condition = condition;
      ev.groups = setup.population.eval_groups;
      ev.episodes = setup.population.eval_episodes;
      ev.seed = derive_seed(setup.seed, "eval", static_cast<std::uint64_t>(c));
      per[c] = evaluate(rl::run_evaluation(trained.checkpoints, ev));
      pooled[c].contribution += per[c].contribution / opt.seeds;
      pooled[c].collective += per[c].collective / opt.seeds;
    }
    std::cout << "  seed " << s << ": contribution " << fmt(per[0].contribution, 5) << " vs "
              << fmt(per[1].contribution, 5) << ", collective return " << fmt(per[0].collective, 5) << " vs "
              << fmt(per[1].collective, 5) << " (identifiable vs anonymous)\n"
              << std::flush;
  }
  ch.expect(pooled[0].contribution > pooled[1].contribution, "mean group contribution " +
                                                                 fmt(pooled[0].contribution) + " <= " +
                                                                 fmt(pooled[1].contribution));
  ch.expect(pooled[0].collective > pooled[1].collective,
            "mean collective return " + fmt(pooled[0].collective) + " <= " + fmt(pooled[1].collective));
  ch.note("contribution " + fmt(pooled[0].contribution, 5) + " vs " + fmt(pooled[1].contribution, 5) +
          ", collective " + fmt(pooled[0].collective, 5) + " vs " + fmt(pooled[1].collective, 5));
  return ch.outcome();
}

// ---------------------------------------------------------------- determinism

void expect_replays(Checks& ch, const std::vector<env::EpisodeRecord>& records, const std::string& what) {
  for (const auto& r : records) {
    std::stringstream buf;
    io::write_record(buf, r);
    const auto back = io::read_records(buf);
    if (back.size() != 1 || !(back[0] == r)) {
      ch.expect(false, what + ": record changed through serialization");
      return;
    }
    try {
      const auto res = io::replay(back[0], r.config);
      ch.expect(res.steps == static_cast<int>(r.steps.size()), what + ": replay");
    } catch (const CorruptionError& e) {
      ch.expect(false, what + ": " + e.what());
      return;
    }
  }
}

Outcome determinism() {
  Checks ch;
  const auto map = env::GridMap::default_map();
  for (const bool human : {false, true}) {
    auto cfg = human ? env::EnvConfig::human_paper() : env::EnvConfig::agent_paper();
    cfg.episode_length = 300;
    const env::CleanupGame game(cfg, map);
    std::vector<env::BotKind> kinds{env::BotKind::cooperator, env::BotKind::defector, env::BotKind::random,
                                    env::BotKind::idle, env::BotKind::random};
    std::vector<env::EpisodeRecord> recs;
    for (int e = 0; e < 3; ++e) {
      recs.push_back(env::play_scripted(game, kinds, derive_seed(5, "det", static_cast<std::uint64_t>(e)),
                                        e % 2 ? Condition::anonymous : Condition::identifiable));
    }
    ch.expect(recs[0] == env::play_scripted(game, kinds, derive_seed(5, "det", 0), Condition::identifiable),
              "scripted episode not reproducible");
    expect_replays(ch, recs, human ? "scripted human preset" : "scripted agent preset");
  }

  rl::TrainingSetup setup;
  setup.population = rl::PopulationConfig::desk();
  setup.population.population = 5;
  setup.population.arenas = 2;
  setup.population.eval_groups = 1;
  setup.population.steps_per_agent = 400;
  setup.env.episode_length = 100;
  setup.net.conv_channels = 4;
  setup.net.mlp = {16};
  setup.net.lstm = 8;
  setup.hyper.batch_size = 2;
  setup.seed = 123;
  const auto a = rl::run_training(setup);
  const auto b = rl::run_training(setup);
  ch.expect(a.checkpoints == b.checkpoints, "serial training checkpoints differ between runs");
  rl::EvaluationSetup ev;
  ev.env.episode_length = 120;
  ev.groups = 1;
  ev.episodes = 2;
  ev.seed = 9;
  const auto evals = rl::run_evaluation(a.checkpoints, ev);
  ch.expect(evals == rl::run_evaluation(b.checkpoints, ev), "evaluation not reproducible");
  expect_replays(ch, evals, "trained evaluation");

  server::SessionConfig sc;
  sc.env.episode_length = 200;
  sc.episodes_per_condition = 1;
  sc.seed = 77;
  server::Session session(sc, server::ConditionOrder::identifiable_first);
  std::vector<server::Outbound> out;
  server::Millis now{0};
  for (int i = 0; i < kGroupSize; ++i) session.join(std::nullopt, now, out);
  Rng rng(3);
  while (!session.done()) {
    const auto next = session.next_deadline();
    if (!next) break;
    now = std::max(now, *next);
    for (int i = 0; i < kGroupSize; ++i) session.input(i, static_cast<int>(rng.uniform_int(env::kNumActions)), now);
    session.advance(now, out);
  }
  ch.expect(session.valid() && session.records().size() == 2, "simulated human session did not finish");
  expect_replays(ch, session.records(), "human session");
  return ch.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<std::string> only;
  DirectionalOptions dir;
  app.add_option("--only", only, "Run only the named criteria");
  app.add_flag("--long", dir.long_run, "Include the long-running training check");
  app.add_option("--steps", dir.steps, "Steps per agent for the training check")->capture_default_str();
  app.add_option("--seeds", dir.seeds, "Seeds for the training check")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    std::string name;
    double budget_s;  // <= 0: no stated runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"env-statistics", 120, env_statistics},
      {"reward-arithmetic", 0, reward_arithmetic},
      {"learner-numerics", 600, learner_numerics},
      {"metric-oracles", 60, metric_oracles},
      {"statistics-oracles", 900, statistics_oracles},
      {"social-dilemma", 1200, social_dilemma},
      {"canonical-oracle", 0, canonical_oracle},
      {"directional-training", 0, [&] { return directional_training(dir); }},
      {"determinism", 0, determinism},
  };
  for (const auto& name : only) {
    if (std::none_of(criteria.begin(), criteria.end(), [&](const Criterion& c) { return c.name == name; })) {
      std::cerr << "unknown criterion '" << name << "'\n";
      return 2;
    }
  }

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.verdict == Verdict::pass && c.budget_s > 0 && secs > c.budget_s) {
      o = {Verdict::fail, "took " + fmt(secs, 4) + " s, limit " + fmt(c.budget_s, 4) + " s"};
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
    std::printf("%s %-21s %8.1fs  %s\n", tag, c.name.c_str(), secs, o.detail.c_str());
    std::fflush(stdout);
    failed += o.verdict == Verdict::fail;
  }
  return failed == 0 ? 0 : 1;
}
