#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cleanup/env/episode_record.hpp"
#include "cleanup/env/grid_map.hpp"

namespace cleanup::metrics {

/// Member indices in the order they stepped from a non-river cell into the
/// river. With min_duration > 0 an entry counts only if the member then
/// stays in the river for at least that many consecutive steps.
std::vector<int> river_entries(const env::EpisodeRecord& record, const env::GridMap& map, int min_duration = 0);

/// Recency of a repeat turn given the number of turns taken by others since
/// the member's previous turn: 0 -> 1, 1 -> 0.75, 2 -> 0.5, 3 -> 0.25, >= 4 -> 0.
double recency_value(int turns_between);

struct TurnTakingOptions {
  bool first_appearance_zero = false;  // count first appearances with recency 0 instead of skipping them
};

/// 1 - mean recency. nullopt when no member appears twice.
std::optional<double> turn_taking_score(std::span<const int> sequence, TurnTakingOptions options = {});

/// Group contribution steps summed into `bins` equal periods; the final bin
/// absorbs the remainder.
std::vector<double> bin_contributions(std::span<const int> per_step, int bins = 10);
std::vector<int> group_contributions_per_step(const env::EpisodeRecord& record);

double gini_pairwise(std::span<const double> values);
double gini_sorted(std::span<const double> values);

struct Consistency {
  double score = 1.0;  // 1 - Gini
  double gini = 0.0;
  bool degenerate = false;  // all bins zero
};

Consistency consistency(std::span<const double> bins);
Consistency consistency(const env::EpisodeRecord& record, int bins = 10);

}  // namespace cleanup::metrics
