#include "cleanup/stats/anova.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "cleanup/common/errors.hpp"
#include "cleanup/stats/distributions.hpp"

namespace cleanup::stats {

namespace {

struct GroupCells {
  std::vector<double> ident, anon;
  std::vector<double> task1, task2;
  int first_task_condition = -1;  // 0 identifiable, 1 anonymous
};

std::map<int, GroupCells> by_group(std::span<const LongObservation> data) {
  std::map<int, GroupCells> groups;
  for (const auto& o : data) {
    if (!std::isfinite(o.value)) throw NumericError("anova: non-finite observation in group " + std::to_string(o.group));
    auto& g = groups[o.group];
    (o.condition == Condition::identifiable ? g.ident : g.anon).push_back(o.value);
  }
  return groups;
}

std::vector<LongObservation> averaged(std::span<const LongObservation> data) {
  std::map<std::tuple<int, int, int>, std::pair<double, int>> cells;
  for (const auto& o : data) {
    auto& c = cells[{o.group, static_cast<int>(o.condition), o.task}];
    c.first += o.value;
    c.second += 1;
  }
  std::vector<LongObservation> out;
  for (const auto& [key, c] : cells) {
    out.push_back({std::get<0>(key), static_cast<Condition>(std::get<1>(key)), std::get<2>(key), 0,
                   c.first / c.second});
  }
  return out;
}

TestResult f_result(const char* name, double ss_effect, double ss_resid, double df_resid, double estimate,
                    double se_estimate) {
  TestResult r;
  r.name = name;
  r.df1 = 1.0;
  r.df2 = df_resid;
  r.estimate = estimate;
  if (ss_resid <= 1e-300 * std::max(1.0, ss_effect)) {
    r.degenerate = true;
    r.note = "zero residual variance";
    r.statistic = ss_effect > 0.0 ? INFINITY : 0.0;
    r.p = ss_effect > 0.0 ? 0.0 : 1.0;
    r.ci_low = r.ci_high = estimate;
    return r;
  }
  r.statistic = ss_effect / (ss_resid / df_resid);
  r.p = f_sf(r.statistic, 1.0, df_resid);
  const double q = student_t_quantile(0.975, df_resid);
  r.ci_low = estimate - q * se_estimate;
  r.ci_high = estimate + q * se_estimate;
  return r;
}

double sum_sq_dev(const std::vector<double>& v, double m) {
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s;
}

double avg(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TestResult rm_anova_oneway(std::span<const LongObservation> input, AnovaVariant variant) {
  std::vector<LongObservation> owned;
  std::span<const LongObservation> data = input;
  if (variant == AnovaVariant::group_mean) {
    owned = averaged(input);
    // Collapse tasks too: one value per group x condition.
    std::map<std::pair<int, int>, std::pair<double, int>> cells;
    for (const auto& o : owned) {
      auto& c = cells[{o.group, static_cast<int>(o.condition)}];
      c.first += o.value;
      c.second += 1;
    }
    owned.clear();
    for (const auto& [key, c] : cells) {
      owned.push_back({key.first, static_cast<Condition>(key.second), 1, 0, c.first / c.second});
    }
    data = owned;
  }
  const auto groups = by_group(data);
  if (groups.size() < 2) throw ConfigError("rm_anova_oneway: need at least 2 groups");
  double contrast = 0.0, ss_within = 0.0;
  std::size_t n = 0;
  for (const auto& [id, g] : groups) {
    if (g.ident.empty() || g.ident.size() != g.anon.size()) {
      throw ConfigError("rm_anova_oneway: group " + std::to_string(id) +
                        " is unbalanced across conditions (" + std::to_string(g.ident.size()) + " identifiable, " +
                        std::to_string(g.anon.size()) + " anonymous)");
    }
    std::vector<double> all = g.ident;
    all.insert(all.end(), g.anon.begin(), g.anon.end());
    ss_within += sum_sq_dev(all, avg(all));
    for (double v : g.ident) contrast += v;
    for (double v : g.anon) contrast -= v;
    n += all.size();
  }
  const double N = static_cast<double>(n);
  const double G = static_cast<double>(groups.size());
  const double ss_cond = contrast * contrast / N;
  const double ss_resid = std::max(0.0, ss_within - ss_cond);
  const double df_resid = N - G - 1.0;
  if (df_resid < 1.0) throw ConfigError("rm_anova_oneway: no residual degrees of freedom");
  const double estimate = 2.0 * contrast / N;
  const double se = std::sqrt(ss_resid / df_resid * 4.0 / N);
  auto r = f_result("rm_anova_condition", ss_cond, ss_resid, df_resid, estimate, se);
  if (variant == AnovaVariant::group_mean) r.note += r.note.empty() ? "group means" : "; group means";
  return r;
}

TwoWayAnova rm_anova_twoway(std::span<const LongObservation> input, AnovaVariant variant) {
  std::vector<LongObservation> owned;
  std::span<const LongObservation> data = input;
  if (variant == AnovaVariant::group_mean) {
    owned = averaged(input);
    data = owned;
  }
  std::map<int, GroupCells> groups;
  for (const auto& o : data) {
    if (o.task != 1 && o.task != 2) throw ConfigError("rm_anova_twoway: task must be 1 or 2");
    if (!std::isfinite(o.value)) throw NumericError("anova: non-finite observation in group " + std::to_string(o.group));
    auto& g = groups[o.group];
    (o.task == 1 ? g.task1 : g.task2).push_back(o.value);
    (o.condition == Condition::identifiable ? g.ident : g.anon).push_back(o.value);
    const int cond = static_cast<int>(o.condition);
    const int first = o.task == 1 ? cond : 1 - cond;
    if (g.first_task_condition == -1) {
      g.first_task_condition = first;
    } else if (g.first_task_condition != first) {
      throw ConfigError("rm_anova_twoway: group " + std::to_string(o.group) +
                        " mixes conditions within a task");
    }
  }
  if (groups.size() < 3) throw ConfigError("rm_anova_twoway: need at least 3 groups");
  const std::size_t per_task = groups.begin()->second.task1.size();
  int order_a = 0;
  for (const auto& [id, g] : groups) {
    if (g.task1.empty() || g.task2.empty()) {
      throw ConfigError("rm_anova_twoway: group " + std::to_string(id) + " is missing a task cell");
    }
    if (g.task1.size() != per_task || g.task2.size() != per_task) {
      throw ConfigError("rm_anova_twoway: group " + std::to_string(id) + " has unequal observation counts");
    }
    if (g.first_task_condition == 0) ++order_a;
  }
  const int G = static_cast<int>(groups.size());
  if (2 * order_a != G) throw ConfigError("rm_anova_twoway: design is not counterbalanced across orders");

  double c_cond = 0.0, c_task = 0.0, ss_within = 0.0;
  std::vector<double> means_a, means_b;
  double cell[2][2] = {{0, 0}, {0, 0}};  // [condition][task-1]
  double cell_n[2][2] = {{0, 0}, {0, 0}};
  for (const auto& [id, g] : groups) {
    std::vector<double> all = g.task1;
    all.insert(all.end(), g.task2.begin(), g.task2.end());
    const double gm = avg(all);
    ss_within += sum_sq_dev(all, gm);
    for (double v : g.ident) c_cond += v;
    for (double v : g.anon) c_cond -= v;
    for (double v : g.task1) c_task += v;
    for (double v : g.task2) c_task -= v;
    (g.first_task_condition == 0 ? means_a : means_b).push_back(gm);
    const int c1 = g.first_task_condition, c2 = 1 - g.first_task_condition;
    for (double v : g.task1) cell[c1][0] += v, cell_n[c1][0] += 1;
    for (double v : g.task2) cell[c2][1] += v, cell_n[c2][1] += 1;
  }
  const double N = static_cast<double>(G) * 2.0 * static_cast<double>(per_task);
  const double ss_cond = c_cond * c_cond / N;
  const double ss_task = c_task * c_task / N;
  const double ss_resid = std::max(0.0, ss_within - ss_cond - ss_task);
  const double df_resid = N - G - 2.0;
  if (df_resid < 1.0) throw ConfigError("rm_anova_twoway: no residual degrees of freedom");
  const double se_main = std::sqrt(ss_resid / df_resid * 4.0 / N);

  TwoWayAnova out;
  out.condition = f_result("rm_anova_condition", ss_cond, ss_resid, df_resid, 2.0 * c_cond / N, se_main);
  out.task = f_result("rm_anova_task", ss_task, ss_resid, df_resid, 2.0 * c_task / N, se_main);

  // Between-group stratum: group means by order.
  const double ma = avg(means_a), mb = avg(means_b);
  std::vector<double> all_means = means_a;
  all_means.insert(all_means.end(), means_b.begin(), means_b.end());
  const double grand = avg(all_means);
  const double ss_order = static_cast<double>(means_a.size()) * (ma - grand) * (ma - grand) +
                          static_cast<double>(means_b.size()) * (mb - grand) * (mb - grand);
  const double ss_between_resid = sum_sq_dev(means_a, ma) + sum_sq_dev(means_b, mb);
  const double df_between = static_cast<double>(G) - 2.0;
  for (int c = 0; c < 2; ++c) {
    for (int t = 0; t < 2; ++t) cell[c][t] /= cell_n[c][t];
  }
  // (ident - anon | task 1) - (ident - anon | task 2) = 2 * (ma - mb)
  const double interaction = (cell[0][0] - cell[1][0]) - (cell[0][1] - cell[1][1]);
  const double se_int =
      2.0 * std::sqrt(ss_between_resid / df_between * (1.0 / means_a.size() + 1.0 / means_b.size()));
  out.interaction =
      f_result("rm_anova_condition_x_task", ss_order, ss_between_resid, df_between, interaction, se_int);
  if (variant == AnovaVariant::group_mean) {
    out.condition.note = out.task.note = out.interaction.note = "group means";
  }
  return out;
}

}  // namespace cleanup::stats
