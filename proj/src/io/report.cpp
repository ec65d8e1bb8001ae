#include "cleanup/io/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "cleanup/common/digest.hpp"
#include "cleanup/common/errors.hpp"
#include "cleanup/metrics/dilemma.hpp"
#include "cleanup/metrics/jenks.hpp"
#include "cleanup/metrics/spatial.hpp"
#include "cleanup/metrics/temporal.hpp"
#include "cleanup/stats/anova.hpp"
#include "cleanup/stats/regression.hpp"

namespace cleanup::io {

using nlohmann::json;

EpisodeMetrics episode_metrics(const env::EpisodeRecord& record, const AnalysisOptions& options) {
  const auto map = env::GridMap::parse(record.map_text, record.players());
  const auto t = env::totals(record);
  EpisodeMetrics m;
  m.condition = record.condition;
  m.group_id = record.group_id;
  m.episode_index = record.episode_index;
  m.task_index = record.task_index;
  m.session_id = record.session_id;
  m.collective_return = std::accumulate(t.extrinsic.begin(), t.extrinsic.end(), 0.0);
  m.group_contribution = std::accumulate(t.contribution_steps.begin(), t.contribution_steps.end(), 0.0);
  m.mean_intrinsic = std::accumulate(t.intrinsic.begin(), t.intrinsic.end(), 0.0) / std::max(1, record.players());
  if (const auto terr = metrics::territoriality(record, map)) {
    m.territoriality = terr->normalized;
    m.territoriality_degenerate = terr->degenerate;
  }
  const auto seq = metrics::river_entries(record, map, options.turn_min_duration);
  m.turns = static_cast<int>(seq.size());
  m.turn_taking = metrics::turn_taking_score(seq, {options.first_appearance_zero});
  if (static_cast<int>(record.steps.size()) >= options.consistency_bins) {
    const auto c = metrics::consistency(record, options.consistency_bins);
    m.consistency = c.score;
    m.consistency_degenerate = c.degenerate;
  }
  return m;
}

namespace {

using Getter = std::optional<double> (*)(const EpisodeMetrics&);

struct MetricDef {
  const char* name;
  Getter get;
};

const MetricDef kMetrics[] = {
    {"group_contribution", [](const EpisodeMetrics& m) -> std::optional<double> { return m.group_contribution; }},
    {"collective_return", [](const EpisodeMetrics& m) -> std::optional<double> { return m.collective_return; }},
    {"territoriality", [](const EpisodeMetrics& m) { return m.territoriality; }},
    {"turn_taking", [](const EpisodeMetrics& m) { return m.turn_taking; }},
    {"consistency", [](const EpisodeMetrics& m) -> std::optional<double> { return m.consistency; }},
};

json opt_json(const std::optional<double>& v) { return v ? stats::number_json(*v) : json(nullptr); }

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::string fmt_p(double p) {
  if (std::isnan(p)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), p < 1e-4 ? "%.2e" : "%.4f", p);
  return buf;
}

// Per (group, condition) means of a metric, keyed in a stable order.
std::map<std::pair<int, int>, std::pair<double, int>> cell_means(const std::vector<EpisodeMetrics>& eps, Getter get) {
  std::map<std::pair<int, int>, std::pair<double, int>> cells;
  for (const auto& e : eps) {
    const auto v = get(e);
    if (!v) continue;
    auto& c = cells[{e.group_id, static_cast<int>(e.condition)}];
    c.first += *v;
    c.second += 1;
  }
  return cells;
}

}  // namespace

MetricReport build_report(std::span<const env::EpisodeRecord> records, const ReportOptions& options) {
  if (records.empty()) throw ConfigError("report: no records");
  for (const auto& r : records) {
    if (r.config_digest != records.front().config_digest) {
      throw ConfigError("report: records mix incompatible configurations (" + to_hex(records.front().config_digest) +
                        " vs " + to_hex(r.config_digest) + ")");
    }
  }
  MetricReport rep;
  for (const auto& r : records) rep.episodes.push_back(episode_metrics(r, options.analysis));
  std::ostringstream sum;
  sum << "episodes: " << rep.episodes.size() << "  preset: " << records.front().preset
      << "  config: " << to_hex(records.front().config_digest) << "\n\n";

  for (const auto& e : rep.episodes) {
    rep.lines.push_back({{"kind", "episode"},
                         {"condition", std::string(to_string(e.condition))},
                         {"group_id", e.group_id},
                         {"episode_index", e.episode_index},
                         {"task_index", e.task_index},
                         {"session_id", e.session_id},
                         {"collective_return", stats::number_json(e.collective_return)},
                         {"group_contribution", stats::number_json(e.group_contribution)},
                         {"mean_intrinsic", stats::number_json(e.mean_intrinsic)},
                         {"territoriality", opt_json(e.territoriality)},
                         {"territoriality_degenerate", e.territoriality_degenerate},
                         {"turn_taking", opt_json(e.turn_taking)},
                         {"turns", e.turns},
                         {"consistency", stats::number_json(e.consistency)},
                         {"consistency_degenerate", e.consistency_degenerate}});
  }

  // Condition means.
  sum << "metric                 identifiable (n)        anonymous (n)\n";
  int present[2] = {0, 0};
  for (const auto& e : rep.episodes) ++present[static_cast<int>(e.condition)];
  for (const auto& def : kMetrics) {
    double s[2] = {0, 0};
    int n[2] = {0, 0};
    for (const auto& e : rep.episodes) {
      if (const auto v = def.get(e)) {
        s[static_cast<int>(e.condition)] += *v;
        ++n[static_cast<int>(e.condition)];
      }
    }
    char row[160];
    std::snprintf(row, sizeof(row), "%-22s %14s (%3d) %14s (%3d)\n", def.name, n[0] ? fmt(s[0] / n[0]).c_str() : "-",
                  n[0], n[1] ? fmt(s[1] / n[1]).c_str() : "-", n[1]);
    sum << row;
    for (int c = 0; c < 2; ++c) {
      if (!n[c]) continue;
      rep.lines.push_back({{"kind", "condition_mean"},
                           {"metric", def.name},
                           {"condition", std::string(to_string(static_cast<Condition>(c)))},
                           {"mean", stats::number_json(s[c] / n[c])},
                           {"n", n[c]}});
    }
  }
  sum << "\n";

  const bool both = present[0] > 0 && present[1] > 0;
  if (!both) {
    const std::string msg = std::string("condition comparison skipped: no ") +
                            (present[0] ? "anonymous" : "identifiable") + " records";
    rep.notices.push_back(msg);
    rep.lines.push_back({{"kind", "notice"}, {"message", msg}});
    sum << "notice: " << msg << "\n\n";
  } else {
    const bool has_tasks = std::all_of(rep.episodes.begin(), rep.episodes.end(),
                                       [](const EpisodeMetrics& e) { return e.task_index == 1 || e.task_index == 2; });
    sum << "condition comparisons (" << to_string(options.analysis.anova_variant) << ")\n";
    for (const auto& def : kMetrics) {
      std::vector<stats::LongObservation> obs;
      for (const auto& e : rep.episodes) {
        if (const auto v = def.get(e)) {
          obs.push_back({e.group_id, e.condition, e.task_index == 0 ? 1 : e.task_index, e.episode_index, *v});
        }
      }
      try {
        if (has_tasks) {
          const auto r = stats::rm_anova_twoway(obs, options.analysis.anova_variant);
          rep.lines.push_back({{"kind", "anova_twoway"},
                               {"metric", def.name},
                               {"condition", r.condition.to_json()},
                               {"task", r.task.to_json()},
                               {"interaction", r.interaction.to_json()}});
          sum << "  " << def.name << ": condition F(1, " << r.condition.df2 << ") = " << fmt(r.condition.statistic, 2)
              << " p = " << fmt_p(r.condition.p) << "; task F = " << fmt(r.task.statistic, 2)
              << " p = " << fmt_p(r.task.p) << "; interaction F(1, " << r.interaction.df2
              << ") = " << fmt(r.interaction.statistic, 2) << " p = " << fmt_p(r.interaction.p) << "\n";
        } else {
          const auto r = stats::rm_anova_oneway(obs, options.analysis.anova_variant);
          rep.lines.push_back({{"kind", "anova_oneway"}, {"metric", def.name}, {"result", r.to_json()}});
          sum << "  " << def.name << ": F(1, " << r.df2 << ") = " << fmt(r.statistic, 2) << " p = " << fmt_p(r.p)
              << " diff = " << fmt(r.estimate) << "\n";
        }
      } catch (const std::exception& ex) {
        rep.lines.push_back({{"kind", "notice"}, {"metric", def.name}, {"message", ex.what()}});
        rep.notices.push_back(std::string(def.name) + ": " + ex.what());
        sum << "  " << def.name << ": not testable (" << ex.what() << ")\n";
      }
    }
    sum << "\n";
  }

  // Collective return against temporal coordination, averaged by group x condition.
  const auto ret = cell_means(rep.episodes, kMetrics[1].get);
  for (const char* name : {"turn_taking", "consistency"}) {
    const Getter get = std::string(name) == "turn_taking" ? kMetrics[3].get : kMetrics[4].get;
    const auto pred = cell_means(rep.episodes, get);
    std::vector<double> x, y;
    for (const auto& [key, v] : pred) {
      const auto it = ret.find(key);
      if (it == ret.end()) continue;
      x.push_back(v.first / v.second);
      y.push_back(it->second.first / it->second.second);
    }
    try {
      const auto r = stats::ols_regression(y, x);
      rep.lines.push_back({{"kind", "regression"},
                           {"outcome", "collective_return"},
                           {"predictor", name},
                           {"n", x.size()},
                           {"slope", r.slope.to_json()},
                           {"intercept", r.intercept.to_json()},
                           {"r_squared", stats::number_json(r.r_squared)}});
      sum << "regression collective_return ~ " << name << ": slope " << fmt(r.slope.estimate, 2) << " p = "
          << fmt_p(r.slope.p) << " (n = " << x.size() << ")\n";
    } catch (const std::exception& ex) {
      rep.lines.push_back({{"kind", "notice"}, {"message", std::string("regression on ") + name + ": " + ex.what()}});
    }
  }

  if (both) {
    const auto tt = cell_means(rep.episodes, kMetrics[3].get);
    std::vector<double> x, m, y;
    for (const auto& [key, v] : tt) {
      const auto it = ret.find(key);
      if (it == ret.end()) continue;
      x.push_back(key.second == static_cast<int>(Condition::identifiable) ? 1.0 : 0.0);
      m.push_back(v.first / v.second);
      y.push_back(it->second.first / it->second.second);
    }
    try {
      const auto med = stats::mediation(x, m, y, options.analysis.bootstrap_resamples,
                                        derive_seed(options.seed, "bootstrap"), options.threads);
      rep.lines.push_back({{"kind", "mediation"},
                           {"x", "identifiable"},
                           {"mediator", "turn_taking"},
                           {"outcome", "collective_return"},
                           {"a", stats::number_json(med.a)},
                           {"b", stats::number_json(med.b)},
                           {"c", med.total.to_json()},
                           {"c_prime", med.direct.to_json()},
                           {"ab", med.ab.to_json()},
                           {"resamples", med.resamples}});
      sum << "mediation via turn_taking: AB = " << fmt(med.ab.estimate, 3) << " CI [" << fmt(med.ab.ci_low, 3) << ", "
          << fmt(med.ab.ci_high, 3) << "] p = " << fmt_p(med.ab.p) << "; C = " << fmt(med.c, 3)
          << ", C' = " << fmt(med.c_prime, 3) << "\n";
    } catch (const std::exception& ex) {
      rep.lines.push_back({{"kind", "notice"}, {"message", std::string("mediation: ") + ex.what()}});
    }
  }

  // Social-dilemma structure with apple consumption as payoff.
  std::vector<metrics::GroupObservation> groups;
  std::vector<double> all_contrib;
  for (const auto& r : records) {
    groups.push_back(metrics::group_observation(r));
    all_contrib.insert(all_contrib.end(), groups.back().contributions.begin(), groups.back().contributions.end());
  }
  try {
    const auto brk = metrics::jenks_two_class(all_contrib);
    std::vector<metrics::ClassifiedEpisode> classified;
    for (const auto& g : groups) classified.push_back(metrics::classify(g.contributions, g.payoffs, brk.threshold));
    const int n = records.front().players();
    const auto table = metrics::schelling_table(classified, n);
    const auto cond = metrics::dilemma_conditions(table);
    json cells = json::array();
    rep.schelling_csv_rows = json::array();
    for (int k = 0; k <= n; ++k) {
      cells.push_back({{"k", k},
                       {"cooperator_mean", opt_json(table.mean_c(k))},
                       {"cooperator_n", table.count_c(k)},
                       {"defector_mean", opt_json(table.mean_d(k))},
                       {"defector_n", table.count_d(k)}});
      rep.schelling_csv_rows.push_back(cells.back());
    }
    const auto tr = [](const std::optional<stats::TestResult>& t) { return t ? t->to_json() : json(nullptr); };
    rep.lines.push_back({{"kind", "dilemma"},
                         {"jenks_threshold", stats::number_json(brk.threshold)},
                         {"schelling", cells},
                         {"c1", tr(cond.c1)},
                         {"c2", tr(cond.c2)},
                         {"c3a", tr(cond.c3a)},
                         {"c3b", tr(cond.c3b)},
                         {"c3", tr(cond.c3)},
                         {"p_overall", opt_json(cond.p_overall)}});
    sum << "\njenks threshold: " << fmt(brk.threshold, 1) << " contribution steps\n";
    sum << "schelling  k   R_c (n)            R_d (n)\n";
    for (int k = 0; k <= n; ++k) {
      char row[128];
      std::snprintf(row, sizeof(row), "           %d %10s (%3d) %10s (%3d)\n", k,
                    table.mean_c(k) ? fmt(*table.mean_c(k), 1).c_str() : "-", table.count_c(k),
                    table.mean_d(k) ? fmt(*table.mean_d(k), 1).c_str() : "-", table.count_d(k));
      sum << row;
    }
    sum << "dilemma p_overall: " << (cond.p_overall ? fmt_p(*cond.p_overall) : std::string("untestable")) << "\n";
  } catch (const std::exception& ex) {
    rep.lines.push_back({{"kind", "notice"}, {"message", std::string("schelling analysis: ") + ex.what()}});
  }
  try {
    const auto reg = metrics::dilemma_regressions(groups);
    rep.lines.push_back({{"kind", "dilemma_regressions"},
                         {"individual", reg.individual.slope.to_json()},
                         {"group", reg.group.slope.to_json()}});
    sum << "dilemma slopes: individual " << fmt(reg.individual.slope.estimate, 3) << " [" << fmt(reg.individual.slope.ci_low, 3)
        << ", " << fmt(reg.individual.slope.ci_high, 3) << "], group " << fmt(reg.group.slope.estimate, 3) << " ["
        << fmt(reg.group.slope.ci_low, 3) << ", " << fmt(reg.group.slope.ci_high, 3) << "]\n";
  } catch (const std::exception& ex) {
    rep.lines.push_back({{"kind", "notice"}, {"message", std::string("dilemma regressions: ") + ex.what()}});
  }

  // Intrinsic against extrinsic return, per member and episode.
  std::vector<double> intr, extr;
  for (const auto& r : records) {
    const auto t = env::totals(r);
    bool any = false;
    for (const auto& s : r.steps) any = any || !s.intrinsic.empty();
    if (!any) continue;
    for (std::size_t i = 0; i < t.intrinsic.size(); ++i) {
      intr.push_back(t.intrinsic[i]);
      extr.push_back(t.extrinsic[i]);
    }
  }
  if (intr.size() >= 2) {
    const auto d = stats::paired_t(intr, extr);
    rep.lines.push_back({{"kind", "diagnostic"}, {"name", "intrinsic_minus_extrinsic"}, {"result", d.to_json()}});
    sum << "diagnostic intrinsic - extrinsic per member: " << fmt(d.estimate, 2) << " p = " << fmt_p(d.p) << "\n";
  }
  rep.summary = sum.str();
  return rep;
}

void write_report(const std::filesystem::path& dir, const MetricReport& report,
                  std::span<const env::EpisodeRecord> records) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.jsonl");
    for (const auto& l : report.lines) out << l.dump() << '\n';
  }
  std::ofstream(dir / "summary.txt") << report.summary;
  const auto opt = [](const std::optional<double>& v) { return v ? fmt(*v, 6) : std::string(); };
  {
    std::ofstream out(dir / "episodes.csv");
    out << "condition,group,episode,task,collective_return,group_contribution,territoriality,turn_taking,consistency\n";
    for (const auto& e : report.episodes) {
      out << to_string(e.condition) << ',' << e.group_id << ',' << e.episode_index << ',' << e.task_index << ','
          << fmt(e.collective_return, 3) << ',' << fmt(e.group_contribution, 0) << ',' << opt(e.territoriality) << ','
          << opt(e.turn_taking) << ',' << fmt(e.consistency, 6) << '\n';
    }
  }
  {
    std::ofstream out(dir / "schelling.csv");
    out << "k,cooperator_mean,cooperator_n,defector_mean,defector_n\n";
    if (report.schelling_csv_rows.is_array()) {
      for (const auto& row : report.schelling_csv_rows) {
        const auto cell = [](const json& v) { return v.is_null() ? std::string() : fmt(v.get<double>(), 4); };
        out << row["k"].get<int>() << ',' << cell(row["cooperator_mean"]) << ',' << row["cooperator_n"].get<int>() << ','
            << cell(row["defector_mean"]) << ',' << row["defector_n"].get<int>() << '\n';
      }
    }
  }
  std::ofstream terr(dir / "territory.csv");
  std::ofstream timeline(dir / "timeline.csv");
  terr << "condition,group,episode,member,x,y,visits\n";
  timeline << "condition,group,episode,bin,contribution_steps\n";
  for (const auto& r : records) {
    const auto map = env::GridMap::parse(r.map_text, r.players());
    for (int m = 0; m < r.players(); ++m) {
      const auto counts = metrics::visit_counts(r, map, m);
      for (const Pos p : map.river_cells()) {
        const int c = counts[static_cast<std::size_t>(map.index(p))];
        if (c == 0) continue;
        terr << to_string(r.condition) << ',' << r.group_id << ',' << r.episode_index << ',' << m << ',' << p.x << ','
             << p.y << ',' << c << '\n';
      }
    }
    if (static_cast<int>(r.steps.size()) >= 10) {
      const auto bins = metrics::bin_contributions(metrics::group_contributions_per_step(r), 10);
      for (std::size_t b = 0; b < bins.size(); ++b) {
        timeline << to_string(r.condition) << ',' << r.group_id << ',' << r.episode_index << ',' << b << ','
                 << fmt(bins[b], 0) << '\n';
      }
    }
  }
}

}  // namespace cleanup::io
