#include "cleanup/env/env_config.hpp"

#include <algorithm>
#include <cmath>

#include "cleanup/common/digest.hpp"
#include "cleanup/common/errors.hpp"

namespace cleanup::env {

std::string_view to_string(InitialMode m) {
  return m == InitialMode::training_start ? "training-start" : "evaluation-start";
}

InitialMode parse_initial_mode(std::string_view s) {
  if (s == "training-start") return InitialMode::training_start;
  if (s == "evaluation-start") return InitialMode::evaluation_start;
  throw ConfigError("unknown initial mode '" + std::string(s) + "'");
}

EnvConfig EnvConfig::agent_paper() { return EnvConfig{}; }

EnvConfig EnvConfig::human_paper() {
  EnvConfig c;
  c.pr_apple = 0.067;
  c.pr_pollution = 0.6;
  c.h_abundance = 0.3;
  c.h_depletion = 0.6;
  c.episode_length = 2000;
  c.ticket_cost = 4.0;
  c.ticket_penalty = 40.0;
  c.obs_window = 27;
  c.egocentric_rotation = false;
  c.initial_mode = InitialMode::evaluation_start;
  return c;
}

void EnvConfig::validate() const {
  auto in_unit = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
  if (!in_unit(pr_apple)) throw ConfigError("pr_apple must lie in [0, 1]");
  if (!in_unit(pr_pollution)) throw ConfigError("pr_pollution must lie in [0, 1]");
  if (!(h_abundance >= 0.0 && h_abundance < h_depletion && h_depletion <= 1.0)) {
    throw ConfigError("require 0 <= h_abundance < h_depletion <= 1");
  }
  if (episode_length <= 0) throw ConfigError("episode_length must be positive");
  if (!std::isfinite(apple_reward) || !std::isfinite(ticket_cost) || !std::isfinite(ticket_penalty)) {
    throw ConfigError("rewards and ticket economics must be finite");
  }
  if (beam_length < 1) throw ConfigError("beam_length must be >= 1");
  if (beam_width < 1 || beam_width % 2 == 0) throw ConfigError("beam_width must be odd and >= 1");
  if (obs_window < 3 || obs_window % 2 == 0) throw ConfigError("obs_window must be odd and >= 3");
  if (ticket_budget && *ticket_budget < 0) throw ConfigError("ticket_budget must be >= 0");
  if (num_players < 1) throw ConfigError("num_players must be >= 1");
}

std::uint64_t EnvConfig::digest() const {
  Fnv1a h;
  h.add(std::string_view("EnvConfig/1"));
  h.add(pr_apple);
  h.add(pr_pollution);
  h.add(h_abundance);
  h.add(h_depletion);
  h.add(episode_length);
  h.add(apple_reward);
  h.add(ticket_cost);
  h.add(ticket_penalty);
  h.add(beam_length);
  h.add(beam_width);
  h.add(obs_window);
  h.add(egocentric_rotation);
  h.add(initial_mode);
  h.add(ticket_budget.value_or(-1));
  h.add(num_players);
  return h.value();
}

double apple_regrowth_prob(double polluted_fraction, const EnvConfig& config) {
  const double scaled = config.pr_apple * (config.h_depletion - polluted_fraction) /
                        (config.h_depletion - config.h_abundance);
  return std::clamp(scaled, 0.0, config.pr_apple);
}

double pollution_spawn_prob(double polluted_fraction, const EnvConfig& config) {
  return polluted_fraction < config.h_depletion ? config.pr_pollution : 0.0;
}

}  // namespace cleanup::env
