#include "cleanup/stats/tests.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cleanup/common/errors.hpp"
#include "cleanup/stats/distributions.hpp"

namespace cleanup::stats {

nlohmann::json number_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::strtod(buf, nullptr);
}

nlohmann::json TestResult::to_json() const {
  nlohmann::json j = {{"name", name},
                      {"statistic", number_json(statistic)},
                      {"df1", number_json(df1)},
                      {"df2", number_json(df2)},
                      {"p", number_json(p)},
                      {"estimate", number_json(estimate)},
                      {"ci_low", number_json(ci_low)},
                      {"ci_high", number_json(ci_high)},
                      {"degenerate", degenerate}};
  if (!note.empty()) j["note"] = note;
  return j;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw ConfigError("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.size() < 2) throw ConfigError("variance needs at least two observations");
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

namespace {

double t_p_value(double t, double df, Alternative alt) {
  switch (alt) {
    case Alternative::greater:
      return student_t_sf(t, df);
    case Alternative::less:
      return student_t_cdf(t, df);
    case Alternative::two_sided:
      break;
  }
  if (std::isnan(t)) return 1.0;
  return std::min(1.0, 2.0 * student_t_sf(std::fabs(t), df));
}

}  // namespace

TestResult welch_t(std::span<const double> a, std::span<const double> b, Alternative alt) {
  if (a.size() < 2 || b.size() < 2) throw ConfigError("welch_t: each sample needs n >= 2");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = variance(a) / na, vb = variance(b) / nb;
  if (va + vb == 0.0) throw NumericError("welch_t: both samples have zero variance");
  TestResult r;
  r.name = "welch_t";
  r.estimate = mean(a) - mean(b);
  const double se = std::sqrt(va + vb);
  r.statistic = r.estimate / se;
  r.df1 = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.p = t_p_value(r.statistic, r.df1, alt);
  const double q = student_t_quantile(0.975, r.df1);
  r.ci_low = r.estimate - q * se;
  r.ci_high = r.estimate + q * se;
  return r;
}

TestResult paired_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("paired_t: samples differ in length");
  if (a.size() < 2) throw ConfigError("paired_t: need n >= 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  TestResult r;
  r.name = "paired_t";
  r.estimate = mean(d);
  r.df1 = static_cast<double>(d.size() - 1);
  const double var = variance(d);
  if (var == 0.0) {
    r.degenerate = true;
    r.note = "zero variance of differences";
    r.statistic = r.estimate == 0.0 ? 0.0 : std::copysign(INFINITY, r.estimate);
    r.p = r.estimate == 0.0 ? 1.0 : 0.0;
    r.ci_low = r.ci_high = r.estimate;
    return r;
  }
  const double se = std::sqrt(var / static_cast<double>(d.size()));
  r.statistic = r.estimate / se;
  r.p = t_p_value(r.statistic, r.df1, Alternative::two_sided);
  const double q = student_t_quantile(0.975, r.df1);
  r.ci_low = r.estimate - q * se;
  r.ci_high = r.estimate + q * se;
  return r;
}

TestResult fisher_combine(std::span<const double> p_values, double floor) {
  if (p_values.empty()) throw ConfigError("fisher_combine: no p values");
  TestResult r;
  r.name = "fisher_combine";
  double chi2 = 0.0;
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("fisher_combine: p values must lie in [0, 1]");
    if (p < floor) {
      p = floor;
      r.degenerate = true;
      r.note = "p value clamped at floor";
    }
    chi2 -= 2.0 * std::log(p);
  }
  r.statistic = chi2 == 0.0 ? 0.0 : chi2;
  r.df1 = 2.0 * static_cast<double>(p_values.size());
  r.p = chi2_sf(r.statistic, r.df1);
  return r;
}

double max_p_combine(std::span<const double> p_values) {
  if (p_values.empty()) throw ConfigError("max_p_combine: no p values");
  return *std::max_element(p_values.begin(), p_values.end());
}

TestResult ks_uniform(std::span<const double> samples) {
  if (samples.empty()) throw ConfigError("ks_uniform: empty sample");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = std::clamp(x[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  TestResult r;
  r.name = "ks_uniform";
  r.statistic = d;
  r.df1 = n;
  const double sn = std::sqrt(n);
  r.p = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
  return r;
}

}  // namespace cleanup::stats
