#include "cleanup/metrics/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cleanup/common/errors.hpp"

namespace cleanup::metrics {

std::vector<int> river_entries(const env::EpisodeRecord& record, const env::GridMap& map, int min_duration) {
  const auto n = static_cast<std::size_t>(record.players());
  const auto in_river = [&](Pos p) { return map.in_bounds(p) && map.at(p) == env::Cell::river; };
  struct Entry {
    std::size_t step;
    int member;
  };
  std::vector<Entry> entries;
  std::vector<bool> was(n);
  for (std::size_t i = 0; i < n && i < record.initial_positions.size(); ++i) was[i] = in_river(record.initial_positions[i]);
  for (std::size_t s = 0; s < record.steps.size(); ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool now = in_river(record.steps[s].players[i].pos);
      if (now && !was[i]) entries.push_back({s, static_cast<int>(i)});
      was[i] = now;
    }
  }
  std::vector<int> seq;
  for (const auto& e : entries) {
    if (min_duration > 0) {
      int stay = 0;
      for (std::size_t s = e.step; s < record.steps.size() && stay < min_duration; ++s) {
        if (!in_river(record.steps[s].players[static_cast<std::size_t>(e.member)].pos)) break;
        ++stay;
      }
      if (stay < min_duration) continue;
    }
    seq.push_back(e.member);
  }
  return seq;
}

double recency_value(int turns_between) {
  if (turns_between < 0) throw ConfigError("recency_value: negative turn count");
  return turns_between >= 4 ? 0.0 : 1.0 - 0.25 * turns_between;
}

std::optional<double> turn_taking_score(std::span<const int> sequence, TurnTakingOptions options) {
  std::map<int, std::size_t> last;
  double sum = 0.0;
  int repeats = 0, counted = 0;
  for (std::size_t k = 0; k < sequence.size(); ++k) {
    const auto it = last.find(sequence[k]);
    if (it != last.end()) {
      sum += recency_value(static_cast<int>(k - it->second - 1));
      ++repeats;
      ++counted;
    } else if (options.first_appearance_zero) {
      ++counted;
    }
    last[sequence[k]] = k;
  }
  if (repeats == 0) return std::nullopt;
  return 1.0 - sum / counted;
}

std::vector<double> bin_contributions(std::span<const int> per_step, int bins) {
  if (bins < 1) throw ConfigError("bin_contributions: bins must be >= 1");
  const auto len = per_step.size();
  if (len < static_cast<std::size_t>(bins)) throw ConfigError("bin_contributions: fewer steps than bins");
  const std::size_t width = len / static_cast<std::size_t>(bins);
  std::vector<double> out(static_cast<std::size_t>(bins), 0.0);
  for (std::size_t s = 0; s < len; ++s) {
    out[std::min(s / width, static_cast<std::size_t>(bins - 1))] += per_step[s];
  }
  return out;
}

std::vector<int> group_contributions_per_step(const env::EpisodeRecord& record) {
  std::vector<int> out;
  out.reserve(record.steps.size());
  for (const auto& step : record.steps) {
    int c = 0;
    for (const auto& p : step.players) c += p.contributed;
    out.push_back(c);
  }
  return out;
}

double gini_pairwise(std::span<const double> v) {
  if (v.empty()) throw ConfigError("gini: empty input");
  const double t = static_cast<double>(v.size());
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (total == 0.0) return 0.0;
  double s = 0.0;
  for (double a : v) {
    for (double b : v) s += std::fabs(a - b);
  }
  return s / (2.0 * t * t * (total / t));
}

double gini_sorted(std::span<const double> v) {
  if (v.empty()) throw ConfigError("gini: empty input");
  std::vector<double> x(v.begin(), v.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  if (total == 0.0) return 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) weighted += static_cast<double>(i + 1) * x[i];
  return 2.0 * weighted / (n * total) - (n + 1.0) / n;
}

Consistency consistency(std::span<const double> bins) {
  for (double b : bins) {
    if (b < 0.0) throw ConfigError("consistency: negative bin");
  }
  Consistency c;
  c.degenerate = std::all_of(bins.begin(), bins.end(), [](double b) { return b == 0.0; });
  c.gini = gini_pairwise(bins);
  c.score = 1.0 - c.gini;
  return c;
}

Consistency consistency(const env::EpisodeRecord& record, int bins) {
  const auto per_step = group_contributions_per_step(record);
  return consistency(bin_contributions(per_step, bins));
}

}  // namespace cleanup::metrics
