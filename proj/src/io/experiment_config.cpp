#include "cleanup/io/experiment_config.hpp"

#include <fstream>
#include <set>

#include "cleanup/common/errors.hpp"

namespace cleanup::io {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) throw ConfigError("unknown field '" + (where.empty() ? k : where + "." + k) + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + where + "." + key + "' has the wrong type");
  }
}

}  // namespace

std::string to_string(stats::AnovaVariant v) {
  return v == stats::AnovaVariant::episode_replicate ? "episode-replicate" : "group-mean";
}

stats::AnovaVariant parse_anova_variant(const std::string& s) {
  if (s == "episode-replicate") return stats::AnovaVariant::episode_replicate;
  if (s == "group-mean") return stats::AnovaVariant::group_mean;
  throw ConfigError("unknown anova variant '" + s + "'");
}

env::EnvConfig env_preset(const std::string& name) {
  if (name == "agent-paper" || name == "custom") return env::EnvConfig::agent_paper();
  if (name == "human-paper") return env::EnvConfig::human_paper();
  throw ConfigError("unknown preset '" + name + "' (expected agent-paper, human-paper or custom)");
}

json to_json(const env::EnvConfig& c) {
  json j = {{"pr_apple", c.pr_apple},
            {"pr_pollution", c.pr_pollution},
            {"h_abundance", c.h_abundance},
            {"h_depletion", c.h_depletion},
            {"episode_length", c.episode_length},
            {"apple_reward", c.apple_reward},
            {"ticket_cost", c.ticket_cost},
            {"ticket_penalty", c.ticket_penalty},
            {"beam_length", c.beam_length},
            {"beam_width", c.beam_width},
            {"obs_window", c.obs_window},
            {"egocentric_rotation", c.egocentric_rotation},
            {"initial_mode", std::string(to_string(c.initial_mode))},
            {"num_players", c.num_players}};
  j["ticket_budget"] = c.ticket_budget ? json(*c.ticket_budget) : json(nullptr);
  return j;
}

env::EnvConfig env_config_from_json(const json& j, env::EnvConfig c) {
  const std::string w = "env";
  check_keys(j,
             {"pr_apple", "pr_pollution", "h_abundance", "h_depletion", "episode_length", "apple_reward",
              "ticket_cost", "ticket_penalty", "beam_length", "beam_width", "obs_window", "egocentric_rotation",
              "initial_mode", "ticket_budget", "num_players"},
             w);
  read(j, "pr_apple", c.pr_apple, w);
  read(j, "pr_pollution", c.pr_pollution, w);
  read(j, "h_abundance", c.h_abundance, w);
  read(j, "h_depletion", c.h_depletion, w);
  read(j, "episode_length", c.episode_length, w);
  read(j, "apple_reward", c.apple_reward, w);
  read(j, "ticket_cost", c.ticket_cost, w);
  read(j, "ticket_penalty", c.ticket_penalty, w);
  read(j, "beam_length", c.beam_length, w);
  read(j, "beam_width", c.beam_width, w);
  read(j, "obs_window", c.obs_window, w);
  read(j, "egocentric_rotation", c.egocentric_rotation, w);
  read(j, "num_players", c.num_players, w);
  if (j.contains("initial_mode")) c.initial_mode = env::parse_initial_mode(j.at("initial_mode").get<std::string>());
  if (j.contains("ticket_budget")) {
    if (j.at("ticket_budget").is_null()) {
      c.ticket_budget.reset();
    } else {
      int b = 0;
      read(j, "ticket_budget", b, w);
      c.ticket_budget = b;
    }
  }
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  env_preset(preset);
  env.validate();
  if (preset != "custom" && env != env_preset(preset)) {
    throw ConfigError("preset '" + preset + "' does not allow environment overrides; use preset 'custom'");
  }
  if (conditions.empty()) throw ConfigError("conditions: at least one condition required");
  population.validate();
  net.validate();
  training.hyper.validate();
  if (training.threads < 0) throw ConfigError("training.threads must be >= 0");
  if (training.checkpoint_every_episodes < 0) throw ConfigError("training.checkpoint_every_episodes must be >= 0");
  if (analysis.consistency_bins < 1) throw ConfigError("analysis.consistency_bins must be >= 1");
  if (analysis.turn_min_duration < 0) throw ConfigError("analysis.turn_min_duration must be >= 0");
  if (analysis.bootstrap_resamples < 100) throw ConfigError("analysis.bootstrap_resamples must be >= 100");
  if (net.obs_size != env.obs_window) throw ConfigError("net.obs_size must equal env.obs_window");
  if (net.scalars != env.num_players) throw ConfigError("net.scalars must equal env.num_players");
  if (population.group_size != env.num_players) throw ConfigError("population.group_size must equal env.num_players");
}

json to_json(const ExperimentConfig& c) {
  json conds = json::array();
  for (auto k : c.conditions) conds.push_back(std::string(to_string(k)));
  const auto& h = c.training.hyper;
  json hyper = {{"learning_rate", h.learning_rate}, {"rms_decay", h.rms_decay},
                {"rms_epsilon", h.rms_epsilon},     {"momentum", h.momentum},
                {"entropy_cost", h.entropy_cost},   {"discount", h.discount},
                {"value_cost", h.value_cost},       {"clip_rho", h.clip_rho},
                {"clip_c", h.clip_c},               {"batch_size", h.batch_size},
                {"segment_length", h.segment_length}};
  hyper["max_grad_norm"] = h.max_grad_norm ? json(*h.max_grad_norm) : json(nullptr);
  return {{"preset", c.preset},
          {"env", to_json(c.env)},
          {"conditions", conds},
          {"seed", c.seed},
          {"population",
           {{"population", c.population.population},
            {"arenas", c.population.arenas},
            {"group_size", c.population.group_size},
            {"steps_per_agent", c.population.steps_per_agent},
            {"eval_groups", c.population.eval_groups},
            {"eval_episodes", c.population.eval_episodes}}},
          {"net",
           {{"conv_channels", c.net.conv_channels},
            {"kernel", c.net.kernel},
            {"mlp", c.net.mlp},
            {"lstm", c.net.lstm}}},
          {"training",
           {{"hyper", hyper},
            {"mode", c.training.mode == rl::ExecutionMode::serial ? "serial" : "threaded"},
            {"threads", c.training.threads},
            {"checkpoint_every_episodes", c.training.checkpoint_every_episodes}}},
          {"analysis",
           {{"consistency_bins", c.analysis.consistency_bins},
            {"turn_min_duration", c.analysis.turn_min_duration},
            {"first_appearance_zero", c.analysis.first_appearance_zero},
            {"bootstrap_resamples", c.analysis.bootstrap_resamples},
            {"anova_variant", to_string(c.analysis.anova_variant)}}}};
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, {"preset", "env", "conditions", "seed", "population", "net", "training", "analysis"}, "");
  ExperimentConfig c;
  read(j, "preset", c.preset, "");
  c.env = env_preset(c.preset);
  if (j.contains("env")) {
    const auto env = env_config_from_json(j.at("env"), c.env);
    if (c.preset != "custom" && env != c.env) {
      throw ConfigError("preset '" + c.preset + "' does not allow environment overrides; use preset 'custom'");
    }
    c.env = env;
  }
  if (j.contains("conditions")) {
    c.conditions.clear();
    for (const auto& s : j.at("conditions")) c.conditions.push_back(parse_condition(s.get<std::string>()));
  }
  read(j, "seed", c.seed, "");
  if (j.contains("population")) {
    const auto& p = j.at("population");
    const std::string w = "population";
    check_keys(p, {"preset", "population", "arenas", "group_size", "steps_per_agent", "eval_groups", "eval_episodes"},
               w);
    if (p.contains("preset")) {
      const auto name = p.at("preset").get<std::string>();
      if (name == "desk") {
        c.population = rl::PopulationConfig::desk();
      } else if (name == "paper") {
        c.population = rl::PopulationConfig::paper();
      } else {
        throw ConfigError("unknown population preset '" + name + "' (expected desk or paper)");
      }
    }
    read(p, "population", c.population.population, w);
    read(p, "arenas", c.population.arenas, w);
    read(p, "group_size", c.population.group_size, w);
    read(p, "steps_per_agent", c.population.steps_per_agent, w);
    read(p, "eval_groups", c.population.eval_groups, w);
    read(p, "eval_episodes", c.population.eval_episodes, w);
  }
  c.net.obs_size = c.env.obs_window;
  c.net.scalars = c.env.num_players;
  if (j.contains("net")) {
    const auto& n = j.at("net");
    check_keys(n, {"conv_channels", "kernel", "mlp", "lstm"}, "net");
    read(n, "conv_channels", c.net.conv_channels, "net");
    read(n, "kernel", c.net.kernel, "net");
    read(n, "mlp", c.net.mlp, "net");
    read(n, "lstm", c.net.lstm, "net");
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    check_keys(t, {"hyper", "mode", "threads", "checkpoint_every_episodes"}, "training");
    if (t.contains("hyper")) {
      const auto& h = t.at("hyper");
      const std::string w = "training.hyper";
      check_keys(h,
                 {"learning_rate", "rms_decay", "rms_epsilon", "momentum", "entropy_cost", "discount", "value_cost",
                  "clip_rho", "clip_c", "batch_size", "segment_length", "max_grad_norm"},
                 w);
      auto& x = c.training.hyper;
      read(h, "learning_rate", x.learning_rate, w);
      read(h, "rms_decay", x.rms_decay, w);
      read(h, "rms_epsilon", x.rms_epsilon, w);
      read(h, "momentum", x.momentum, w);
      read(h, "entropy_cost", x.entropy_cost, w);
      read(h, "discount", x.discount, w);
      read(h, "value_cost", x.value_cost, w);
      read(h, "clip_rho", x.clip_rho, w);
      read(h, "clip_c", x.clip_c, w);
      read(h, "batch_size", x.batch_size, w);
      read(h, "segment_length", x.segment_length, w);
      if (h.contains("max_grad_norm")) {
        if (h.at("max_grad_norm").is_null()) {
          x.max_grad_norm.reset();
        } else {
          double v = 0;
          read(h, "max_grad_norm", v, w);
          x.max_grad_norm = v;
        }
      }
    }
    if (t.contains("mode")) {
      const auto m = t.at("mode").get<std::string>();
      if (m == "serial") {
        c.training.mode = rl::ExecutionMode::serial;
      } else if (m == "threaded") {
        c.training.mode = rl::ExecutionMode::threaded;
      } else {
        throw ConfigError("training.mode must be serial or threaded");
      }
    }
    read(t, "threads", c.training.threads, "training");
    read(t, "checkpoint_every_episodes", c.training.checkpoint_every_episodes, "training");
  }
  if (j.contains("analysis")) {
    const auto& a = j.at("analysis");
    const std::string w = "analysis";
    check_keys(a,
               {"consistency_bins", "turn_min_duration", "first_appearance_zero", "bootstrap_resamples",
                "anova_variant"},
               w);
    read(a, "consistency_bins", c.analysis.consistency_bins, w);
    read(a, "turn_min_duration", c.analysis.turn_min_duration, w);
    read(a, "first_appearance_zero", c.analysis.first_appearance_zero, w);
    read(a, "bootstrap_resamples", c.analysis.bootstrap_resamples, w);
    if (a.contains("anova_variant")) c.analysis.anova_variant = parse_anova_variant(a.at("anova_variant").get<std::string>());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& c) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path.string());
  out << to_json(c).dump(2) << "\n";
}

}  // namespace cleanup::io
