#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cleanup/common/rng.hpp"
#include "cleanup/common/types.hpp"

namespace cleanup::reputation {

/// Weights on falling behind (alpha) and getting ahead of (beta) the group.
struct ReputationParams {
  double alpha = 0.0;
  double beta = 0.0;
  bool operator==(const ReputationParams&) const = default;
};

inline constexpr double kAlphaLo = 2.4, kAlphaHi = 3.0;
inline constexpr double kBetaLo = 0.16, kBetaHi = 0.20;
inline constexpr double kDefaultLambda = 0.97;
inline constexpr int kDefaultVisibilityRange = 9;

/// Chebyshev-distance visibility used in the anonymous condition.
struct VisibilityRule {
  int range = kDefaultVisibilityRange;
};

/// One observer's view of every group member's exponentially smoothed
/// contribution history: c_j <- lambda * c_j + q_j, starting at zero.
class ContributionTracker {
 public:
  explicit ContributionTracker(int players = kGroupSize, double lambda = kDefaultLambda);

  /// Applies one step of contribution flags. In the anonymous condition only
  /// the observer and members within `visibility` of the observer are
  /// updated; the rest keep their previous trace.
  void update(std::span<const std::uint8_t> contributed, std::span<const Pos> positions, int observer,
              Condition condition, VisibilityRule visibility = {});

  std::span<const double> traces() const { return traces_; }
  double trace(int player) const { return traces_[static_cast<std::size_t>(player)]; }
  double lambda() const { return lambda_; }
  int players() const { return static_cast<int>(traces_.size()); }

  /// Mean trace of the other members; with include_self, of all members.
  double group_mean(int observer, bool include_self = false) const;

  /// Observer-first ordering (self, then others by player index). This is
  /// the vector attached to observations and fed to the network.
  std::vector<float> observer_view(int observer) const;

  bool operator==(const ContributionTracker&) const = default;

 private:
  double lambda_;
  std::vector<double> traces_;
};

/// -alpha * max(c_bar - c_self, 0) - beta * max(c_self - c_bar, 0). Never positive.
double intrinsic_reward(double c_self, double c_bar, const ReputationParams& params);

inline double combined_reward(double extrinsic, double intrinsic) { return extrinsic + intrinsic; }

/// alpha ~ U(2.4, 3.0), beta ~ U(0.16, 0.20).
ReputationParams sample_params(Rng& rng);

}  // namespace cleanup::reputation
