#include "cleanup/metrics/jenks.hpp"

#include <algorithm>
#include <vector>

#include "cleanup/common/errors.hpp"

namespace cleanup::metrics {

namespace {

double ssd(const std::vector<double>& x, std::size_t lo, std::size_t hi) {
  double m = 0.0;
  for (std::size_t i = lo; i < hi; ++i) m += x[i];
  m /= static_cast<double>(hi - lo);
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += (x[i] - m) * (x[i] - m);
  return s;
}

}  // namespace

JenksBreak jenks_two_class(std::span<const double> values) {
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  if (x.size() < 2 || x.front() == x.back()) throw ConfigError("jenks_two_class: need at least two distinct values");
  JenksBreak best;
  bool found = false;
  for (std::size_t k = 1; k < x.size(); ++k) {
    if (x[k] == x[k - 1]) continue;  // equal values stay in one class
    const double s = ssd(x, 0, k) + ssd(x, k, x.size());
    if (!found || s < best.within_ss) {
      best = {x[k], x[k - 1], s, static_cast<int>(k)};
      found = true;
    }
  }
  return best;
}

}  // namespace cleanup::metrics
