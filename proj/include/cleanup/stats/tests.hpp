#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cleanup::stats {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct TestResult {
  std::string name;
  double statistic = kNaN;
  double df1 = kNaN;
  double df2 = kNaN;  // second df for F tests
  double p = kNaN;
  double estimate = kNaN;
  double ci_low = kNaN;
  double ci_high = kNaN;
  bool degenerate = false;
  std::string note;

  /// Numbers rounded to 12 significant digits; non-finite values as strings.
  nlohmann::json to_json() const;
};

/// Rounds to 12 significant digits as serialized.
nlohmann::json number_json(double v);

enum class Alternative { greater, less, two_sided };

/// Welch's unequal-variance t-test on mean(a) - mean(b).
TestResult welch_t(std::span<const double> a, std::span<const double> b,
                   Alternative alt = Alternative::greater);

/// Two-sided paired t-test on a - b.
TestResult paired_t(std::span<const double> a, std::span<const double> b);

/// Fisher's method: -2 sum ln p ~ chi^2(2k). p values below `floor` are
/// clamped and the result is flagged.
TestResult fisher_combine(std::span<const double> p_values, double floor = 1e-300);

double max_p_combine(std::span<const double> p_values);

/// One-sample Kolmogorov-Smirnov test against U(0, 1), asymptotic p with
/// Stephens' small-sample correction.
TestResult ks_uniform(std::span<const double> samples);

double mean(std::span<const double> v);
/// Sample variance (n - 1 denominator).
double variance(std::span<const double> v);

}  // namespace cleanup::stats
