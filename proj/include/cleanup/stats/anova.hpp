#pragma once

#include <span>

#include "cleanup/common/types.hpp"
#include "cleanup/stats/tests.hpp"

namespace cleanup::stats {

struct LongObservation {
  int group = 0;
  Condition condition = Condition::identifiable;
  int task = 1;  // 1 or 2
  int episode = 0;
  double value = 0.0;
};

enum class AnovaVariant {
  episode_replicate,  // every episode is an observation; group is an error stratum
  group_mean,         // episodes averaged within group x condition first
};

/// Condition effect with group as an error stratum. The estimate is
/// mean(identifiable) - mean(anonymous). Each group must have as many
/// observations under one condition as under the other.
TestResult rm_anova_oneway(std::span<const LongObservation> data,
                           AnovaVariant variant = AnovaVariant::episode_replicate);

struct TwoWayAnova {
  TestResult condition;    // within-group stratum
  TestResult task;         // within-group stratum
  TestResult interaction;  // equals the order contrast, tested between groups
};

/// Condition x task for a counterbalanced design: each group completes one
/// condition per task, equal numbers of groups take each order, and every
/// group has the same number of observations per task.
TwoWayAnova rm_anova_twoway(std::span<const LongObservation> data,
                            AnovaVariant variant = AnovaVariant::episode_replicate);

}  // namespace cleanup::stats
