#include "cleanup/metrics/spatial.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace cleanup::metrics {

PresenceMatrix presence(const env::EpisodeRecord& record, const env::GridMap& map) {
  std::map<Pos, std::set<int>> visits;
  const auto note = [&](int member, Pos p) {
    if (map.in_bounds(p) && map.at(p) == env::Cell::river) visits[p].insert(member);
  };
  for (int i = 0; i < static_cast<int>(record.initial_positions.size()); ++i) {
    note(i, record.initial_positions[static_cast<std::size_t>(i)]);
  }
  for (const auto& step : record.steps) {
    for (int i = 0; i < static_cast<int>(step.players.size()); ++i) note(i, step.players[static_cast<std::size_t>(i)].pos);
  }
  PresenceMatrix m;
  m.group_size = record.players();
  for (const auto& [pos, who] : visits) {
    m.locations.push_back(pos);
    m.members.emplace_back(who.begin(), who.end());
  }
  return m;
}

std::optional<Territoriality> territoriality(const PresenceMatrix& presence) {
  if (presence.locations.empty()) return std::nullopt;
  Territoriality t;
  t.locations = static_cast<int>(presence.locations.size());
  std::set<int> all;
  double total = 0.0;
  for (const auto& who : presence.members) {
    total += static_cast<double>(who.size());
    all.insert(who.begin(), who.end());
  }
  t.alpha = total / t.locations;
  t.gamma = static_cast<double>(all.size());
  t.beta = t.gamma / t.alpha;
  t.normalized = t.beta / std::min(t.gamma, static_cast<double>(t.locations));
  t.degenerate = t.locations == 1;
  return t;
}

std::optional<Territoriality> territoriality(const env::EpisodeRecord& record, const env::GridMap& map) {
  return territoriality(presence(record, map));
}

std::vector<int> visit_counts(const env::EpisodeRecord& record, const env::GridMap& map, int member) {
  std::vector<int> counts(static_cast<std::size_t>(map.cell_count()), 0);
  for (const auto& step : record.steps) {
    for (int i = 0; i < static_cast<int>(step.players.size()); ++i) {
      if (member >= 0 && i != member) continue;
      const Pos p = step.players[static_cast<std::size_t>(i)].pos;
      if (map.in_bounds(p)) ++counts[static_cast<std::size_t>(map.index(p))];
    }
  }
  return counts;
}

}  // namespace cleanup::metrics
