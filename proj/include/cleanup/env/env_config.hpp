#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cleanup::env {

enum class InitialMode : std::uint8_t {
  training_start,    // river saturated with pollution, empty orchard
  evaluation_start,  // clean river, full orchard
};

std::string_view to_string(InitialMode m);
InitialMode parse_initial_mode(std::string_view s);

/// Parameters of one Cleanup arena.
struct EnvConfig {
  double pr_apple = 0.03;
  double pr_pollution = 0.5;
  double h_abundance = 0.0;
  double h_depletion = 0.32;
  int episode_length = 1000;
  double apple_reward = 1.0;
  double ticket_cost = 1.0;      // paid by the issuer
  double ticket_penalty = 50.0;  // paid by the target
  int beam_length = 5;
  int beam_width = 3;
  int obs_window = 15;
  bool egocentric_rotation = true;  // rotate the window so the avatar faces up
  InitialMode initial_mode = InitialMode::training_start;
  std::optional<int> ticket_budget;  // nullopt = unlimited
  int num_players = 5;

  /// Agent-experiment parameters.
  static EnvConfig agent_paper();
  /// Human-experiment parameters: 27x27 north-up window, 2000-step episodes,
  /// ticket cost 4 and penalty 40.
  static EnvConfig human_paper();

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  /// Stable hash of every field, used to tag episode records.
  std::uint64_t digest() const;

  bool operator==(const EnvConfig&) const = default;
};

/// Probability that an empty orchard cell regrows an apple this step.
double apple_regrowth_prob(double polluted_fraction, const EnvConfig& config);

/// Probability that one new pollution cell appears this step.
double pollution_spawn_prob(double polluted_fraction, const EnvConfig& config);

}  // namespace cleanup::env
