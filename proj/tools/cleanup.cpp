#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "cleanup/common/errors.hpp"
#include "cleanup/env/scripted_bots.hpp"
#include "cleanup/io/experiment_config.hpp"
#include "cleanup/io/manifest.hpp"
#include "cleanup/io/record_io.hpp"
#include "cleanup/io/replay.hpp"
#include "cleanup/io/report.hpp"
#include "cleanup/rl/population.hpp"
#include "cleanup/server/ws_server.hpp"

namespace fs = std::filesystem;
using namespace cleanup;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

io::ExperimentConfig resolve_config(const Common& c) {
  io::ExperimentConfig cfg = c.config.empty() ? io::ExperimentConfig{} : io::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Root seed; overrides the config");
  app->add_option("--out", c.out, "Output directory")->capture_default_str();
}

std::string episode_file(const env::EpisodeRecord& r) {
  char name[96];
  std::snprintf(name, sizeof(name), "%s_g%03d_e%02d.jsonl", std::string(to_string(r.condition)).c_str(), r.group_id,
                r.episode_index);
  return name;
}

void write_records(const fs::path& dir, const std::vector<env::EpisodeRecord>& records) {
  fs::create_directories(dir);
  for (const auto& r : records) io::write_record(dir / episode_file(r), r);
}

int cmd_train(const Common& c, const std::vector<std::string>& conditions, std::optional<std::int64_t> steps,
              std::optional<int> threads) {
  const auto cfg = resolve_config(c);
  auto manifest = io::RunManifest::for_run("train", cfg);
  std::vector<Condition> conds = cfg.conditions;
  if (!conditions.empty()) {
    conds.clear();
    for (const auto& s : conditions) conds.push_back(parse_condition(s));
  }
  for (const Condition cond : conds) {
    const std::string name(to_string(cond));
    const fs::path dir = fs::path(c.out) / name;
    fs::create_directories(dir);
    std::ofstream metrics(dir / "metrics.jsonl");
    rl::TrainingSetup setup;
    setup.population = cfg.population;
    if (steps) setup.population.steps_per_agent = *steps;
    setup.env = cfg.env;
    setup.net = cfg.net;
    setup.hyper = cfg.training.hyper;
    setup.condition = cond;
    setup.seed = derive_seed(cfg.seed, "train", static_cast<std::uint64_t>(cond));
    setup.mode = cfg.training.mode;
    setup.threads = threads.value_or(cfg.training.threads);
    setup.checkpoint_every_episodes = cfg.training.checkpoint_every_episodes;
    setup.out_dir = dir;
    std::int64_t episodes = 0;
    setup.metrics = [&](const nlohmann::json& j) {
      metrics << j.dump() << '\n';
      if (j.value("kind", "") == "episode" && ++episodes % 50 == 0) {
        std::cerr << name << ": episode " << episodes << " collective return " << j.value("collective_return", 0.0)
                  << '\n';
      }
    };
    const auto result = rl::run_training(setup);
    std::cerr << name << ": trained " << result.checkpoints.size() << " agents over " << result.episodes
              << " episodes\n";
    manifest.artifacts[name + "/checkpoints"] = name + "/checkpoints";
    manifest.artifacts[name + "/metrics"] = name + "/metrics.jsonl";
  }
  io::write_manifest(fs::path(c.out) / "manifest.json", manifest);
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoints, const std::string& condition, std::optional<int> groups,
             std::optional<int> episodes, int threads) {
  const auto cfg = resolve_config(c);
  const auto cks = net::load_checkpoint_dir(checkpoints);
  if (cks.empty()) throw ConfigError("eval: no agent_*.ckpt files in " + checkpoints);
  rl::EvaluationSetup setup;
  setup.env = cfg.env;
  setup.condition = parse_condition(condition.empty() ? cks.front().condition : condition);
  setup.groups = groups.value_or(cfg.population.eval_groups);
  setup.episodes = episodes.value_or(cfg.population.eval_episodes);
  setup.seed = derive_seed(cfg.seed, "eval", static_cast<std::uint64_t>(setup.condition));
  setup.threads = threads;
  setup.preset = cfg.preset;
  const auto records = rl::run_evaluation(cks, setup);
  write_records(fs::path(c.out) / "records", records);
  auto manifest = io::RunManifest::for_run("eval", cfg);
  manifest.artifacts["checkpoints"] = fs::absolute(checkpoints).string();
  manifest.artifacts["records"] = "records";
  io::write_manifest(fs::path(c.out) / "manifest.json", manifest);
  std::cerr << "wrote " << records.size() << " records (" << to_string(setup.condition) << ")\n";
  return 0;
}

int cmd_analyze(const Common& c, const std::vector<std::string>& dirs, int threads) {
  const auto cfg = resolve_config(c);
  std::vector<env::EpisodeRecord> records;
  for (const auto& d : dirs) {
    auto more = fs::is_directory(d) ? io::read_record_dir(d) : io::read_records(fs::path(d));
    records.insert(records.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  if (records.empty()) throw ConfigError("analyze: no records found");
  io::ReportOptions opt;
  opt.analysis = cfg.analysis;
  opt.seed = derive_seed(cfg.seed, "bootstrap");
  opt.threads = threads;
  const auto report = io::build_report(records, opt);
  io::write_report(c.out, report, records);
  auto manifest = io::RunManifest::for_run("analyze", cfg);
  for (const char* f : {"report.jsonl", "summary.txt", "episodes.csv", "schelling.csv", "territory.csv", "timeline.csv"}) {
    manifest.artifacts[f] = f;
  }
  io::write_manifest(fs::path(c.out) / "manifest.json", manifest);
  std::cout << report.summary;
  return 0;
}

int cmd_replay(const std::vector<std::string>& files, const std::string& preset) {
  std::optional<env::EnvConfig> expected;
  if (!preset.empty()) expected = io::env_preset(preset);
  int n = 0;
  for (const auto& f : files) {
    const auto records = io::read_records(fs::path(f));
    for (const auto& r : records) {
      const auto res = io::replay(r, expected);
      std::cout << f << ": episode " << r.group_id << "/" << r.episode_index << " replayed " << res.steps
                << " steps, digests match\n";
      ++n;
    }
  }
  std::cout << n << " record(s) verified\n";
  return 0;
}

int cmd_simulate(const Common& c, int episodes, const std::string& preset, const std::string& condition,
                 const std::string& mix) {
  auto cfg = resolve_config(c);
  if (!preset.empty()) {
    cfg.preset = preset;
    cfg.env = io::env_preset(preset);
  }
  cfg.env.initial_mode = env::InitialMode::evaluation_start;
  const env::CleanupGame game(cfg.env, env::GridMap::default_map());
  const Condition cond = parse_condition(condition);
  const auto records = env::scripted_corpus(game, episodes, cfg.seed, cond, env::parse_bot_mix(mix), cfg.preset);
  write_records(fs::path(c.out) / "records", records);
  auto manifest = io::RunManifest::for_run("simulate", cfg);
  manifest.artifacts["records"] = "records";
  io::write_manifest(fs::path(c.out) / "manifest.json", manifest);
  std::cerr << "wrote " << records.size() << " scripted episodes\n";
  return 0;
}

server::PlayServer* g_server = nullptr;

int cmd_serve(const Common& c, const server::ServerOptions& base, const std::string& order, bool tutorials,
              int tick_ms, int reconnect_ms) {
  const auto cfg = resolve_config(c);
  server::ServerOptions opt = base;
  opt.order = server::parse_order(order);
  opt.out_dir = c.out;
  opt.base.env = cfg.preset == "agent-paper" && c.config.empty() ? env::EnvConfig::human_paper() : cfg.env;
  opt.base.env.initial_mode = env::InitialMode::evaluation_start;
  opt.base.seed = cfg.seed;
  opt.base.tick = server::Millis(tick_ms);
  opt.base.reconnect_window = server::Millis(reconnect_ms);
  if (tutorials) opt.base.tutorials = server::default_tutorials(opt.base.env);
  opt.log = [](const std::string& s) { std::cerr << s << '\n'; };
  server::PlayServer srv(opt);
  g_server = &srv;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  srv.run();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cleanup public-goods experiments: training, evaluation, human sessions and analysis"};
  app.require_subcommand(1);
  Common common;

  auto* train = app.add_subcommand("train", "Train agent populations, one per condition");
  add_common(train, common);
  std::vector<std::string> train_conditions;
  std::optional<std::int64_t> train_steps;
  std::optional<int> train_threads;
  train->add_option("--condition", train_conditions, "Restrict to these conditions");
  train->add_option("--steps-per-agent", train_steps, "Override the per-agent step budget");
  train->add_option("--threads", train_threads, "Worker threads in threaded mode");

  auto* eval = app.add_subcommand("eval", "Evaluate trained agents in fixed groups and record episodes");
  add_common(eval, common);
  std::string eval_ckpt, eval_condition;
  std::optional<int> eval_groups, eval_episodes;
  int eval_threads = 1;
  eval->add_option("--checkpoints", eval_ckpt, "Directory of agent_*.ckpt")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--condition", eval_condition, "identifiable or anonymous (default: as trained)");
  eval->add_option("--groups", eval_groups, "Number of groups");
  eval->add_option("--episodes", eval_episodes, "Episodes per group");
  eval->add_option("--threads", eval_threads, "Worker threads");

  auto* analyze = app.add_subcommand("analyze", "Compute metrics and statistics over episode records");
  add_common(analyze, common);
  std::vector<std::string> analyze_dirs;
  int analyze_threads = 1;
  analyze->add_option("records", analyze_dirs, "Record files or directories")->required();
  analyze->add_option("--threads", analyze_threads, "Bootstrap threads");

  auto* replay = app.add_subcommand("replay", "Re-simulate records and verify every digest");
  std::vector<std::string> replay_files;
  std::string replay_preset;
  replay->add_option("records", replay_files, "Record files")->required()->check(CLI::ExistingFile);
  replay->add_option("--preset", replay_preset, "Require records to use this parameter preset");

  auto* serve = app.add_subcommand("serve", "Host live five-participant sessions");
  add_common(serve, common);
  server::ServerOptions serve_opt;
  std::string serve_order = "auto";
  bool serve_tutorials = true;
  int tick_ms = 60, reconnect_ms = 60000;
  std::string static_dir;
  serve->add_option("--port", serve_opt.port, "Listen port")->capture_default_str();
  serve->add_option("--address", serve_opt.address, "Listen address")->capture_default_str();
  serve->add_option("--sessions", serve_opt.sessions, "Sessions to run before exiting")->capture_default_str();
  serve->add_option("--order", serve_order, "auto, identifiable-first or anonymous-first")->capture_default_str();
  serve->add_option("--static", static_dir, "Web client bundle directory");
  serve->add_flag("!--no-tutorials", serve_tutorials, "Skip the tutorial stage");
  serve->add_option("--tick-ms", tick_ms, "Milliseconds per environment step")->capture_default_str();
  serve->add_option("--reconnect-ms", reconnect_ms, "Reconnection window")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "Record episodes played by scripted cooperator and defector bots");
  add_common(simulate, common);
  int sim_episodes = 200;
  std::string sim_preset = "human-paper", sim_condition = "identifiable", sim_mix = "mixed";
  simulate->add_option("--episodes", sim_episodes, "Episodes")->capture_default_str();
  simulate->add_option("--preset", sim_preset, "Environment preset")->capture_default_str();
  simulate->add_option("--condition", sim_condition, "Condition label")->capture_default_str();
  simulate->add_option("--mix", sim_mix, "mixed, cooperators or defectors")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(common, train_conditions, train_steps, train_threads);
    if (*eval) return cmd_eval(common, eval_ckpt, eval_condition, eval_groups, eval_episodes, eval_threads);
    if (*analyze) return cmd_analyze(common, analyze_dirs, analyze_threads);
    if (*replay) return cmd_replay(replay_files, replay_preset);
    if (*simulate) return cmd_simulate(common, sim_episodes, sim_preset, sim_condition, sim_mix);
    if (*serve) {
      serve_opt.static_dir = static_dir;
      return cmd_serve(common, serve_opt, serve_order, serve_tutorials, tick_ms, reconnect_ms);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const CorruptionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
