#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>

#include "cleanup/stats/tests.hpp"

namespace cleanup::stats {

struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  double rss = 0.0;
  int df = 0;  // residual degrees of freedom
};

/// Least squares via column-pivoted QR. Throws NumericError if X is rank deficient.
OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

struct Regression {
  TestResult slope;      // estimate, t, df, two-sided p, 95% CI
  TestResult intercept;
  double r_squared = 0.0;
};

/// y = b0 + b1 * x + e.
Regression ols_regression(std::span<const double> y, std::span<const double> x);

struct Mediation {
  double a = 0.0;        // m ~ x
  double b = 0.0;        // y ~ x + m, coefficient on m
  double c = 0.0;        // y ~ x
  double c_prime = 0.0;  // y ~ x + m, coefficient on x
  TestResult ab;         // indirect effect with percentile bootstrap CI and p
  TestResult total;      // C
  TestResult direct;     // C'
  int resamples = 0;
};

/// Percentile bootstrap for the indirect effect A*B. Resample r draws from
/// its own derived seed, so results do not depend on `threads`.
Mediation mediation(std::span<const double> x, std::span<const double> m, std::span<const double> y,
                    int resamples = 10000, std::uint64_t seed = 0, int threads = 1);

}  // namespace cleanup::stats
