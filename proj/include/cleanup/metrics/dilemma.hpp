#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cleanup/env/episode_record.hpp"
#include "cleanup/stats/regression.hpp"
#include "cleanup/stats/tests.hpp"

namespace cleanup::metrics {

enum class Role { cooperate, defect };

/// Members labelled by contribution >= threshold. Payoff is apple consumption.
struct ClassifiedEpisode {
  std::vector<Role> roles;
  std::vector<double> contributions;
  std::vector<double> payoffs;
  int cooperators = 0;
  std::optional<double> cooperator_mean;
  std::optional<double> defector_mean;
};

ClassifiedEpisode classify(std::span<const double> contributions, std::span<const double> payoffs, double threshold);
ClassifiedEpisode classify(const env::EpisodeRecord& record, double threshold);

/// Per-episode class means indexed by the episode's cooperator count k = 0..N.
struct SchellingTable {
  int group_size = 0;
  std::vector<std::vector<double>> cooperator;  // [k] -> per-episode means
  std::vector<std::vector<double>> defector;

  std::optional<double> mean_c(int k) const;
  std::optional<double> mean_d(int k) const;
  int count_c(int k) const { return static_cast<int>(cooperator[static_cast<std::size_t>(k)].size()); }
  int count_d(int k) const { return static_cast<int>(defector[static_cast<std::size_t>(k)].size()); }
};

SchellingTable schelling_table(std::span<const ClassifiedEpisode> episodes, int group_size);

/// Cell pairs compared by each condition as (role, k) against (role, k).
/// The defaults index by total cooperators k out of N:
///   1:  R_c(N)   > R_d(0)   mutual cooperation over mutual defection
///   2:  R_c(N)   > R_c(1)   over a lone cooperator among defectors
///   3a: R_d(0)   > R_c(1)   fear
///   3b: R_d(N-1) > R_c(N)   greed
struct DilemmaCell {
  Role role = Role::cooperate;
  int k = 0;
};
struct DilemmaComparison {
  DilemmaCell higher, lower;
};
struct DilemmaCells {
  DilemmaComparison c1, c2, c3a, c3b;
  static DilemmaCells defaults(int group_size);
};

struct DilemmaConditions {
  std::optional<stats::TestResult> c1, c2, c3a, c3b;  // nullopt: untestable (fewer than 2 samples)
  std::optional<stats::TestResult> c3;                 // Fisher over the testable 3a/3b
  std::optional<double> p_overall;                     // max(p1, p2, p3)
};

DilemmaConditions dilemma_conditions(const SchellingTable& table, const DilemmaCells& cells);
DilemmaConditions dilemma_conditions(const SchellingTable& table);

struct CanonicalPayoffs {
  std::vector<double> payoffs;  // u_k = e - c_k + (M/n) sum c
  double total = 0.0;           // U = n e + (M - 1) sum c
};

CanonicalPayoffs canonical_payoffs(std::span<const double> contributions, double endowment = 20.0,
                                   double multiplier = 1.6);

struct GroupObservation {
  std::vector<double> contributions;
  std::vector<double> payoffs;
};

struct DilemmaRegressions {
  stats::Regression individual;  // payoff deviation on contribution deviation, within groups
  stats::Regression group;       // mean payoff on mean contribution, across groups
};

DilemmaRegressions dilemma_regressions(std::span<const GroupObservation> groups);

GroupObservation group_observation(const env::EpisodeRecord& record);

}  // namespace cleanup::metrics
