#pragma once

#include <optional>
#include <vector>

#include "cleanup/common/types.hpp"
#include "cleanup/env/episode_record.hpp"
#include "cleanup/env/grid_map.hpp"

namespace cleanup::metrics {

/// River cells visited at least once, with the members who visited each.
struct PresenceMatrix {
  std::vector<Pos> locations;
  std::vector<std::vector<int>> members;  // sorted, nonempty, parallel to locations
  int group_size = 0;
};

PresenceMatrix presence(const env::EpisodeRecord& record, const env::GridMap& map);

struct Territoriality {
  double alpha = 0.0;  // mean members per visited location
  double gamma = 0.0;  // distinct members over all locations
  double beta = 0.0;   // gamma / alpha
  double normalized = 0.0;  // beta / min(gamma, N_l)
  int locations = 0;        // N_l
  bool degenerate = false;  // a single visited location
};

/// nullopt when no river cell was visited.
std::optional<Territoriality> territoriality(const PresenceMatrix& presence);
std::optional<Territoriality> territoriality(const env::EpisodeRecord& record, const env::GridMap& map);

/// Visit counts per map cell for one member (-1 for all), row-major.
std::vector<int> visit_counts(const env::EpisodeRecord& record, const env::GridMap& map, int member = -1);

}  // namespace cleanup::metrics
