#pragma once

#include <span>

namespace cleanup::metrics {

struct JenksBreak {
  double threshold = 0.0;  // smallest value of the upper class; value >= threshold -> upper
  double lower_max = 0.0;  // largest value of the lower class
  double within_ss = 0.0;  // total within-class sum of squared deviations
  int lower_count = 0;
};

/// Exhaustive two-class natural-breaks split. Ties in within-class sum of
/// squares go to the smallest boundary. Throws ConfigError when all values
/// are identical.
JenksBreak jenks_two_class(std::span<const double> values);

}  // namespace cleanup::metrics
