#include "cleanup/stats/distributions.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <algorithm>
#include <cmath>
#include <limits>

#include "cleanup/common/errors.hpp"

namespace cleanup::stats {

namespace bm = boost::math;

namespace {

void require_df(double df, const char* what) {
  if (!(df > 0.0) || std::isnan(df)) throw NumericError(std::string(what) + ": degrees of freedom must be positive");
}

}  // namespace

double student_t_cdf(double t, double df) {
  require_df(df, "student_t_cdf");
  if (std::isnan(t)) throw NumericError("student_t_cdf: NaN statistic");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  return bm::cdf(bm::students_t(df), t);
}

double student_t_sf(double t, double df) {
  require_df(df, "student_t_sf");
  if (std::isnan(t)) throw NumericError("student_t_sf: NaN statistic");
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  return bm::cdf(bm::complement(bm::students_t(df), t));
}

double student_t_quantile(double p, double df) {
  require_df(df, "student_t_quantile");
  return bm::quantile(bm::students_t(df), p);
}

double f_sf(double f, double df1, double df2) {
  require_df(df1, "f_sf");
  require_df(df2, "f_sf");
  if (std::isnan(f)) throw NumericError("f_sf: NaN statistic");
  if (std::isinf(f)) return 0.0;
  if (f <= 0.0) return 1.0;
  return bm::cdf(bm::complement(bm::fisher_f(df1, df2), f));
}

double chi2_sf(double x, double df) {
  require_df(df, "chi2_sf");
  if (std::isnan(x)) throw NumericError("chi2_sf: NaN statistic");
  if (std::isinf(x)) return 0.0;
  if (x <= 0.0) return 1.0;
  return bm::cdf(bm::complement(bm::chi_squared(df), x));
}

double normal_cdf(double z) {
  if (std::isinf(z)) return z > 0 ? 1.0 : 0.0;
  return bm::cdf(bm::normal(), z);
}

double normal_quantile(double p) { return bm::quantile(bm::normal(), p); }

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  // Dual series: 1 - sqrt(2 pi)/lambda * sum exp(-(2k-1)^2 pi^2 / (8 lambda^2)).
  if (lambda < 1.0) {
    const double pi = 3.14159265358979323846;
    double s = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double term = std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * pi * pi / (8.0 * lambda * lambda));
      s += term;
      if (term < 1e-17) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

}  // namespace cleanup::stats
