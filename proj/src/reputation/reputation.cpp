#include "cleanup/reputation/reputation.hpp"

#include <algorithm>

#include "cleanup/common/errors.hpp"

namespace cleanup::reputation {

ContributionTracker::ContributionTracker(int players, double lambda)
    : lambda_(lambda), traces_(static_cast<std::size_t>(players), 0.0) {
  if (players < 1) throw ConfigError("tracker: need at least one player");
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ConfigError("tracker: lambda must lie in [0, 1)");
}

void ContributionTracker::update(std::span<const std::uint8_t> contributed, std::span<const Pos> positions,
                                 int observer, Condition condition, VisibilityRule visibility) {
  const auto n = traces_.size();
  if (contributed.size() != n || positions.size() != n) {
    throw ConfigError("tracker: expected one flag and one position per player");
  }
  const Pos me = positions[static_cast<std::size_t>(observer)];
  for (std::size_t j = 0; j < n; ++j) {
    const bool visible = condition == Condition::identifiable || static_cast<int>(j) == observer ||
                         chebyshev(me, positions[j]) <= visibility.range;
    if (visible) traces_[j] = lambda_ * traces_[j] + static_cast<double>(contributed[j]);
  }
}

double ContributionTracker::group_mean(int observer, bool include_self) const {
  double sum = 0.0;
  int count = 0;
  for (std::size_t j = 0; j < traces_.size(); ++j) {
    if (!include_self && static_cast<int>(j) == observer) continue;
    sum += traces_[j];
    ++count;
  }
  return count == 0 ? traces_[static_cast<std::size_t>(observer)] : sum / count;
}

std::vector<float> ContributionTracker::observer_view(int observer) const {
  std::vector<float> out;
  out.reserve(traces_.size());
  out.push_back(static_cast<float>(traces_[static_cast<std::size_t>(observer)]));
  for (std::size_t j = 0; j < traces_.size(); ++j) {
    if (static_cast<int>(j) != observer) out.push_back(static_cast<float>(traces_[j]));
  }
  return out;
}

double intrinsic_reward(double c_self, double c_bar, const ReputationParams& params) {
  return -params.alpha * std::max(c_bar - c_self, 0.0) - params.beta * std::max(c_self - c_bar, 0.0);
}

ReputationParams sample_params(Rng& rng) {
  ReputationParams p;
  p.alpha = rng.uniform(kAlphaLo, kAlphaHi);
  p.beta = rng.uniform(kBetaLo, kBetaHi);
  return p;
}

}  // namespace cleanup::reputation
