#include "cleanup/rl/population.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <numeric>
#include <thread>

#include "cleanup/common/errors.hpp"
#include "cleanup/common/rng.hpp"
#include "cleanup/env/game.hpp"
#include "cleanup/rl/arena.hpp"
#include "cleanup/rl/learner.hpp"

namespace cleanup::rl {

PopulationConfig PopulationConfig::desk() { return PopulationConfig{}; }

PopulationConfig PopulationConfig::paper() {
  PopulationConfig p;
  p.population = 120;
  p.arenas = 2000;
  p.steps_per_agent = 100'000'000;
  p.eval_groups = 24;
  p.eval_episodes = 7;
  return p;
}

void PopulationConfig::validate() const {
  if (group_size < 1) throw ConfigError("population: group_size must be >= 1");
  if (population < group_size) throw ConfigError("population: population must be >= group_size");
  if (arenas < 1) throw ConfigError("population: arenas must be >= 1");
  if (steps_per_agent < 1) throw ConfigError("population: steps_per_agent must be >= 1");
  if (eval_groups < 1 || eval_episodes < 1) throw ConfigError("population: evaluation groups and episodes must be >= 1");
  if (eval_groups * group_size > population) {
    throw ConfigError("population: " + std::to_string(eval_groups) + " evaluation groups of " +
                      std::to_string(group_size) + " exceed the population of " + std::to_string(population));
  }
}

void save_checkpoints(const std::filesystem::path& dir, const std::vector<net::Checkpoint>& checkpoints) {
  std::filesystem::create_directories(dir);
  for (const auto& c : checkpoints) {
    char name[32];
    std::snprintf(name, sizeof(name), "agent_%03d.ckpt", c.agent_id);
    net::save_checkpoint(dir / name, c);
  }
}

namespace {

std::vector<int> sample_seats(Rng& rng, const std::vector<std::unique_ptr<Learner>>& learners, int group) {
  std::vector<int> fresh, spent;
  for (const auto& l : learners) (l->exhausted() ? spent : fresh).push_back(l->agent_id());
  rng.shuffle(std::span<int>(fresh));
  if (static_cast<int>(fresh.size()) >= group) {
    fresh.resize(static_cast<std::size_t>(group));
    return fresh;
  }
  rng.shuffle(std::span<int>(spent));
  for (int a : spent) {
    if (static_cast<int>(fresh.size()) == group) break;
    fresh.push_back(a);
  }
  return fresh;
}

nlohmann::json update_line(int agent, std::int64_t steps, const UpdateStats& s) {
  return {{"kind", "update"},
          {"agent", agent},
          {"steps", steps},
          {"policy_loss", s.loss.policy},
          {"value_loss", s.loss.value},
          {"entropy", s.loss.steps ? s.loss.entropy / s.loss.steps : 0.0},
          {"total_loss", s.loss.total},
          {"grad_norm", s.grad_norm},
          {"mean_extrinsic", s.mean_extrinsic},
          {"mean_intrinsic", s.mean_intrinsic}};
}

class Trainer {
 public:
  explicit Trainer(const TrainingSetup& setup)
      : setup_(setup), game_(with_training_start(setup.env), env::GridMap::default_map()) {
    setup_.population.validate();
    setup_.hyper.validate();
    setup_.net.validate();
    if (setup_.population.group_size != setup_.env.num_players) {
      throw ConfigError("population: group_size must equal the number of players");
    }
    for (int i = 0; i < setup_.population.population; ++i) {
      net::PolicyNet<float> net(setup_.net);
      Rng init_rng(derive_seed(setup_.seed, "init", static_cast<std::uint64_t>(i)));
      net.init(init_rng);
      Rng rep_rng(derive_seed(setup_.seed, "reputation", static_cast<std::uint64_t>(i)));
      learners_.push_back(std::make_unique<Learner>(i, std::move(net), reputation::sample_params(rep_rng),
                                                    setup_.hyper, setup_.population.steps_per_agent));
    }
  }

  TrainingResult run() {
    if (setup_.mode == ExecutionMode::serial) {
      std::vector<Rng> arena_rngs;
      for (int a = 0; a < setup_.population.arenas; ++a) {
        arena_rngs.emplace_back(derive_seed(setup_.seed, "arena", static_cast<std::uint64_t>(a)));
      }
      std::int64_t episode = 0;
      while (!all_exhausted()) {
        const auto a = static_cast<std::size_t>(episode % setup_.population.arenas);
        run_episode(arena_rngs[a], a, episode);
        ++episode;
      }
      episodes_ = episode;
    } else {
      run_threaded();
    }
    for (auto& l : learners_) l->flush();
    TrainingResult r;
    r.episodes = episodes_;
    for (const auto& l : learners_) r.checkpoints.push_back(l->checkpoint(setup_.condition));
    if (setup_.out_dir) save_checkpoints(*setup_.out_dir / "checkpoints", r.checkpoints);
    return r;
  }

 private:
  static env::EnvConfig with_training_start(env::EnvConfig c) {
    c.initial_mode = env::InitialMode::training_start;
    return c;
  }

  bool all_exhausted() const {
    return std::all_of(learners_.begin(), learners_.end(), [](const auto& l) { return l->exhausted(); });
  }

  void run_threaded() {
    const int workers = setup_.threads > 0 ? setup_.threads : setup_.population.arenas;
    std::atomic<std::int64_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        Rng rng(derive_seed(setup_.seed, "worker", static_cast<std::uint64_t>(w)));
        try {
          while (!stop && !all_exhausted()) {
            const std::int64_t episode = next++;
            run_episode(rng, static_cast<std::size_t>(episode % setup_.population.arenas), episode);
          }
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          stop = true;
        }
      });
    }
    for (auto& t : pool) t.join();
    episodes_ = next.load();
    if (failure) std::rethrow_exception(failure);
  }

  void run_episode(Rng& rng, std::size_t arena, std::int64_t episode) {
    const auto seat_ids = sample_seats(rng, learners_, setup_.population.group_size);
    std::vector<net::PolicyNet<float>> nets;
    nets.reserve(seat_ids.size());
    std::vector<AgentSeat> seats;
    for (int id : seat_ids) {
      nets.emplace_back(setup_.net);
      nets.back().set_params(learners_[static_cast<std::size_t>(id)]->snapshot());
    }
    for (std::size_t i = 0; i < seat_ids.size(); ++i) {
      seats.push_back({seat_ids[i], &nets[i], learners_[static_cast<std::size_t>(seat_ids[i])]->reputation()});
    }
    EpisodeOptions opt;
    opt.condition = setup_.condition;
    opt.arena = arena;
    opt.episode = static_cast<std::uint64_t>(episode);
    opt.segment_length = setup_.hyper.segment_length;
    const auto sink = [this](const Trajectory& t) { learners_[static_cast<std::size_t>(t.agent)]->submit(t); };

    EpisodeOutcome outcome;
    try {
      outcome = play_episode(game_, seats, derive_seed(setup_.seed, "episode", static_cast<std::uint64_t>(episode)),
                             opt, sink);
    } catch (const NumericError& e) {
      dump_diagnostics(e.what(), episode, seat_ids);
      throw;
    }

    if (setup_.metrics) {
      std::lock_guard lock(metrics_mu_);
      nlohmann::json line = {{"kind", "episode"},
                             {"episode", episode},
                             {"arena", arena},
                             {"agents", seat_ids},
                             {"collective_return", outcome.collective_return()},
                             {"group_contribution", outcome.group_contribution()},
                             {"mean_return", outcome.collective_return() / static_cast<double>(seat_ids.size())},
                             {"mean_intrinsic", std::accumulate(outcome.intrinsic.begin(), outcome.intrinsic.end(), 0.0) /
                                                    static_cast<double>(seat_ids.size())}};
      setup_.metrics(line);
      for (int id : seat_ids) {
        auto& l = *learners_[static_cast<std::size_t>(id)];
        for (const auto& s : l.drain_stats()) setup_.metrics(update_line(id, l.steps_consumed(), s));
      }
    }
    if (setup_.out_dir && setup_.checkpoint_every_episodes > 0 && (episode + 1) % setup_.checkpoint_every_episodes == 0) {
      std::vector<net::Checkpoint> cks;
      for (const auto& l : learners_) cks.push_back(l->checkpoint(setup_.condition));
      std::lock_guard lock(metrics_mu_);
      save_checkpoints(*setup_.out_dir / "checkpoints", cks);
    }
  }

  void dump_diagnostics(const std::string& what, std::int64_t episode, const std::vector<int>& seats) {
    if (!setup_.out_dir) return;
    std::filesystem::create_directories(*setup_.out_dir);
    nlohmann::json d = {{"error", what}, {"episode", episode}, {"agents", seats}, {"seed", setup_.seed}};
    for (const auto& l : learners_) {
      d["learners"].push_back({{"agent", l->agent_id()}, {"steps", l->steps_consumed()}, {"updates", l->updates()}});
    }
    std::ofstream(*setup_.out_dir / "diagnostics.json") << d.dump(2) << "\n";
  }

  TrainingSetup setup_;
  env::CleanupGame game_;
  std::vector<std::unique_ptr<Learner>> learners_;
  std::int64_t episodes_ = 0;
  std::mutex metrics_mu_;
};

}  // namespace

TrainingResult run_training(const TrainingSetup& setup) { return Trainer(setup).run(); }

std::vector<env::EpisodeRecord> run_evaluation(const std::vector<net::Checkpoint>& checkpoints,
                                               const EvaluationSetup& setup) {
  env::EnvConfig cfg = setup.env;
  cfg.initial_mode = env::InitialMode::evaluation_start;
  cfg.validate();
  const int g = cfg.num_players;
  const int pop = static_cast<int>(checkpoints.size());
  if (setup.groups < 1 || setup.episodes < 1) throw ConfigError("evaluation: groups and episodes must be >= 1");
  if (pop % g != 0 || setup.groups * g > pop) {
    throw ConfigError("evaluation: population of " + std::to_string(pop) + " cannot be partitioned into " +
                      std::to_string(setup.groups) + " groups of " + std::to_string(g));
  }
  const env::CleanupGame game(cfg, env::GridMap::default_map());

  std::vector<net::PolicyNet<float>> nets;
  nets.reserve(checkpoints.size());
  for (const auto& c : checkpoints) {
    nets.emplace_back(c.net);
    if (c.params.size() != nets.back().params().size()) throw CorruptionError("evaluation: checkpoint size mismatch");
    nets.back().set_params(c.params);
  }
  std::vector<int> order(checkpoints.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(setup.seed, "partition"));
  rng.shuffle(std::span<int>(order));

  std::vector<env::EpisodeRecord> records(static_cast<std::size_t>(setup.groups * setup.episodes));
  const auto play_group = [&](int group) {
    std::vector<AgentSeat> seats;
    for (int k = 0; k < g; ++k) {
      const auto idx = static_cast<std::size_t>(order[static_cast<std::size_t>(group * g + k)]);
      seats.push_back({checkpoints[idx].agent_id, &nets[idx], checkpoints[idx].reputation});
    }
    for (int e = 0; e < setup.episodes; ++e) {
      EpisodeOptions opt;
      opt.condition = setup.condition;
      opt.emit_segments = false;
      opt.record = true;
      opt.preset = setup.preset;
      opt.group_id = group;
      opt.episode_index = e;
      const auto seed = derive_seed(setup.seed, "eval-episode", static_cast<std::uint64_t>(group * setup.episodes + e));
      auto out = play_episode(game, seats, seed, opt);
      records[static_cast<std::size_t>(group * setup.episodes + e)] = std::move(*out.record);
    }
  };

  const int threads = std::max(1, std::min(setup.threads, setup.groups));
  if (threads == 1) {
    for (int grp = 0; grp < setup.groups; ++grp) play_group(grp);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        try {
          for (int grp; (grp = next++) < setup.groups;) play_group(grp);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  return records;
}

}  // namespace cleanup::rl
