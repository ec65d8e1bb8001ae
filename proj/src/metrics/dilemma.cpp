#include "cleanup/metrics/dilemma.hpp"

#include <algorithm>
#include <numeric>

#include "cleanup/common/errors.hpp"

namespace cleanup::metrics {

namespace {

double avg(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

ClassifiedEpisode classify(std::span<const double> contributions, std::span<const double> payoffs, double threshold) {
  if (contributions.size() != payoffs.size() || contributions.empty()) {
    throw ConfigError("classify: contributions and payoffs must be nonempty and aligned");
  }
  ClassifiedEpisode e;
  e.contributions.assign(contributions.begin(), contributions.end());
  e.payoffs.assign(payoffs.begin(), payoffs.end());
  std::vector<double> coop, def;
  for (std::size_t i = 0; i < contributions.size(); ++i) {
    const Role r = contributions[i] >= threshold ? Role::cooperate : Role::defect;
    e.roles.push_back(r);
    (r == Role::cooperate ? coop : def).push_back(payoffs[i]);
  }
  e.cooperators = static_cast<int>(coop.size());
  if (!coop.empty()) e.cooperator_mean = avg(coop);
  if (!def.empty()) e.defector_mean = avg(def);
  return e;
}

GroupObservation group_observation(const env::EpisodeRecord& record) {
  const auto t = env::totals(record);
  GroupObservation g;
  for (std::size_t i = 0; i < t.apples.size(); ++i) {
    g.contributions.push_back(t.contribution_steps[i]);
    g.payoffs.push_back(t.apples[i]);
  }
  return g;
}

ClassifiedEpisode classify(const env::EpisodeRecord& record, double threshold) {
  const auto g = group_observation(record);
  return classify(g.contributions, g.payoffs, threshold);
}

std::optional<double> SchellingTable::mean_c(int k) const {
  const auto& v = cooperator[static_cast<std::size_t>(k)];
  if (v.empty()) return std::nullopt;
  return avg(v);
}

std::optional<double> SchellingTable::mean_d(int k) const {
  const auto& v = defector[static_cast<std::size_t>(k)];
  if (v.empty()) return std::nullopt;
  return avg(v);
}

SchellingTable schelling_table(std::span<const ClassifiedEpisode> episodes, int group_size) {
  if (group_size < 2) throw ConfigError("schelling_table: group_size must be >= 2");
  SchellingTable t;
  t.group_size = group_size;
  t.cooperator.resize(static_cast<std::size_t>(group_size + 1));
  t.defector.resize(static_cast<std::size_t>(group_size + 1));
  for (const auto& e : episodes) {
    if (static_cast<int>(e.roles.size()) != group_size) throw ConfigError("schelling_table: episode group size mismatch");
    const auto k = static_cast<std::size_t>(e.cooperators);
    if (e.cooperator_mean) t.cooperator[k].push_back(*e.cooperator_mean);
    if (e.defector_mean) t.defector[k].push_back(*e.defector_mean);
  }
  return t;
}

DilemmaCells DilemmaCells::defaults(int n) {
  using R = Role;
  return {{{R::cooperate, n}, {R::defect, 0}},
          {{R::cooperate, n}, {R::cooperate, 1}},
          {{R::defect, 0}, {R::cooperate, 1}},
          {{R::defect, n - 1}, {R::cooperate, n}}};
}

namespace {

const std::vector<double>& cell(const SchellingTable& t, DilemmaCell c) {
  if (c.k < 0 || c.k > t.group_size) throw ConfigError("dilemma: cell index out of range");
  return c.role == Role::cooperate ? t.cooperator[static_cast<std::size_t>(c.k)]
                                   : t.defector[static_cast<std::size_t>(c.k)];
}

std::optional<stats::TestResult> compare(const SchellingTable& t, const DilemmaComparison& cmp, const char* name) {
  const auto& hi = cell(t, cmp.higher);
  const auto& lo = cell(t, cmp.lower);
  if (hi.size() < 2 || lo.size() < 2) return std::nullopt;
  try {
    auto r = stats::welch_t(hi, lo, stats::Alternative::greater);
    r.name = name;
    return r;
  } catch (const NumericError&) {
    return std::nullopt;
  }
}

}  // namespace

DilemmaConditions dilemma_conditions(const SchellingTable& table, const DilemmaCells& cells) {
  DilemmaConditions d;
  d.c1 = compare(table, cells.c1, "dilemma_c1");
  d.c2 = compare(table, cells.c2, "dilemma_c2");
  d.c3a = compare(table, cells.c3a, "dilemma_c3a");
  d.c3b = compare(table, cells.c3b, "dilemma_c3b");
  std::vector<double> p3;
  if (d.c3a) p3.push_back(d.c3a->p);
  if (d.c3b) p3.push_back(d.c3b->p);
  if (!p3.empty()) {
    d.c3 = stats::fisher_combine(p3);
    d.c3->name = "dilemma_c3";
    if (p3.size() < 2) d.c3->note = "only one of 3a/3b testable";
  }
  if (d.c1 && d.c2 && d.c3) {
    const double ps[] = {d.c1->p, d.c2->p, d.c3->p};
    d.p_overall = stats::max_p_combine(ps);
  }
  return d;
}

DilemmaConditions dilemma_conditions(const SchellingTable& table) {
  return dilemma_conditions(table, DilemmaCells::defaults(table.group_size));
}

CanonicalPayoffs canonical_payoffs(std::span<const double> c, double e, double M) {
  if (c.empty()) throw ConfigError("canonical_payoffs: empty group");
  const double n = static_cast<double>(c.size());
  double sum = 0.0;
  for (double x : c) {
    if (x < 0.0 || x > e) throw ConfigError("canonical_payoffs: contribution outside [0, endowment]");
    sum += x;
  }
  CanonicalPayoffs out;
  for (double x : c) out.payoffs.push_back(e - x + M / n * sum);
  out.total = n * e + (M - 1.0) * sum;
  return out;
}

DilemmaRegressions dilemma_regressions(std::span<const GroupObservation> groups) {
  if (groups.size() < 2) throw ConfigError("dilemma_regressions: need at least 2 groups");
  std::vector<double> dx, dy, gx, gy;
  for (const auto& g : groups) {
    if (g.contributions.size() != g.payoffs.size() || g.contributions.size() < 2) {
      throw ConfigError("dilemma_regressions: each group needs at least 2 aligned members");
    }
    const double mc = avg(g.contributions), mp = avg(g.payoffs);
    for (std::size_t i = 0; i < g.contributions.size(); ++i) {
      dx.push_back(g.contributions[i] - mc);
      dy.push_back(g.payoffs[i] - mp);
    }
    gx.push_back(mc);
    gy.push_back(mp);
  }
  DilemmaRegressions r;
  r.individual = stats::ols_regression(dy, dx);
  r.individual.slope.name = "dilemma_individual_slope";
  r.group = stats::ols_regression(gy, gx);
  r.group.slope.name = "dilemma_group_slope";
  return r;
}

}  // namespace cleanup::metrics
