#include "cleanup/rl/arena.hpp"

#include <numeric>

#include "cleanup/common/errors.hpp"
#include "cleanup/env/observation.hpp"

namespace cleanup::rl {

double EpisodeOutcome::collective_return() const { return std::accumulate(extrinsic.begin(), extrinsic.end(), 0.0); }

int EpisodeOutcome::group_contribution() const {
  return std::accumulate(contribution_steps.begin(), contribution_steps.end(), 0);
}

void deliver_with_retry(const SegmentSink& sink, const Trajectory& traj, int attempts) {
  for (int i = 1;; ++i) {
    try {
      sink(traj);
      return;
    } catch (const TransientDeliveryError&) {
      if (i >= attempts) throw;
    }
  }
}

namespace {

struct SeatBuffer {
  Trajectory traj;
  net::RecurrentState<float> state;
};

void start_segment(SeatBuffer& b, const AgentSeat& seat, const EpisodeOptions& opt, int index) {
  b.traj = Trajectory{};
  b.traj.id = SegmentId{opt.arena, opt.episode, seat.agent_id, index};
  b.traj.agent = seat.agent_id;
  b.traj.initial_hidden.assign(b.state.hidden.data(), b.state.hidden.data() + b.state.hidden.size());
  b.traj.initial_cell.assign(b.state.cell.data(), b.state.cell.data() + b.state.cell.size());
}

}  // namespace

EpisodeOutcome play_episode(const env::CleanupGame& game, std::span<const AgentSeat> seats, std::uint64_t seed,
                            const EpisodeOptions& opt, const SegmentSink& sink) {
  const auto& cfg = game.config();
  const int n = cfg.num_players;
  if (static_cast<int>(seats.size()) != n) throw ConfigError("play_episode: one seat per player required");
  if (opt.segment_length < 1) throw ConfigError("play_episode: segment_length must be >= 1");
  for (const auto& s : seats) {
    if (!s.net) throw ConfigError("play_episode: seat without a network");
    if (s.net->config().obs_size != cfg.obs_window || s.net->config().obs_channels != env::kObsChannels ||
        s.net->config().scalars != n || s.net->config().actions != env::kNumActions) {
      throw ConfigError("play_episode: network shape does not match the environment");
    }
  }
  const auto& ncfg = seats[0].net->config();
  const auto un = static_cast<std::size_t>(n);
  const auto obs_dim = static_cast<std::size_t>(ncfg.obs_dim());
  const bool emit = opt.emit_segments && static_cast<bool>(sink);

  env::WorldState state = game.reset(seed);
  Rng policy_rng(derive_seed(seed, "policy"));
  std::vector<reputation::ContributionTracker> trackers(un, reputation::ContributionTracker(n));
  std::vector<SeatBuffer> buffers(un);
  std::vector<int> segment_index(un, 0);
  for (std::size_t i = 0; i < un; ++i) {
    buffers[i].state = seats[i].net->initial_state();
    if (emit) start_segment(buffers[i], seats[i], opt, 0);
  }

  std::optional<env::EpisodeRecorder> recorder;
  if (opt.record) {
    std::vector<std::string> ids;
    for (const auto& s : seats) ids.push_back("agent_" + std::to_string(s.agent_id));
    recorder.emplace(game, state, seed, opt.condition, std::move(ids), opt.preset);
    recorder->header().group_id = opt.group_id;
    recorder->header().episode_index = opt.episode_index;
  }

  EpisodeOutcome out;
  for (const auto& s : seats) out.agent_ids.push_back(s.agent_id);
  out.extrinsic.assign(un, 0.0);
  out.intrinsic.assign(un, 0.0);
  out.contribution_steps.assign(un, 0);

  std::vector<float> obs(obs_dim);
  std::vector<env::Action> actions(un);
  std::vector<float> logits_buf(static_cast<std::size_t>(env::kNumActions));
  std::vector<std::uint8_t> contributed(un);
  std::vector<Pos> positions(un);
  std::vector<double> intrinsic(un);

  while (!game.done(state)) {
    for (std::size_t i = 0; i < un; ++i) {
      env::render_planes(game, state, static_cast<int>(i), opt.condition, obs);
      const auto scalars = trackers[i].observer_view(static_cast<int>(i));
      const auto res = seats[i].net->forward(obs, scalars, buffers[i].state);
      for (int k = 0; k < env::kNumActions; ++k) logits_buf[static_cast<std::size_t>(k)] = res.logits(k);
      const int a = net::sample_action(logits_buf, policy_rng);
      actions[i] = env::action_from_index(a);
      if (emit) {
        auto& t = buffers[i].traj;
        t.observations.insert(t.observations.end(), obs.begin(), obs.end());
        t.scalars.insert(t.scalars.end(), scalars.begin(), scalars.end());
        t.actions.push_back(a);
        t.behavior_logits.insert(t.behavior_logits.end(), logits_buf.begin(), logits_buf.end());
      }
    }

    const auto events = game.step(state, actions);
    for (std::size_t i = 0; i < un; ++i) {
      contributed[i] = events.players[i].contributed;
      positions[i] = state.avatars[i].pos;
    }
    for (std::size_t i = 0; i < un; ++i) {
      const int me = static_cast<int>(i);
      trackers[i].update(contributed, positions, me, opt.condition);
      intrinsic[i] = reputation::intrinsic_reward(trackers[i].trace(me), trackers[i].group_mean(me), seats[i].reputation);
      const double extrinsic = events.players[i].reward;
      out.extrinsic[i] += extrinsic;
      out.intrinsic[i] += intrinsic[i];
      out.contribution_steps[i] += contributed[i];
      if (emit) {
        auto& t = buffers[i].traj;
        t.rewards.push_back(static_cast<float>(reputation::combined_reward(extrinsic, intrinsic[i])));
        t.extrinsic.push_back(static_cast<float>(extrinsic));
        t.intrinsic.push_back(static_cast<float>(intrinsic[i]));
        ++t.length;
      }
    }
    if (recorder) recorder->record(state, actions, events, intrinsic);

    if (!emit) continue;
    const bool done = game.done(state);
    for (std::size_t i = 0; i < un; ++i) {
      auto& t = buffers[i].traj;
      if (t.length < opt.segment_length && !done) continue;
      t.terminal = done;
      if (!done) {
        t.bootstrap_observation.resize(obs_dim);
        env::render_planes(game, state, static_cast<int>(i), opt.condition, t.bootstrap_observation);
        t.bootstrap_scalars = trackers[i].observer_view(static_cast<int>(i));
      }
      deliver_with_retry(sink, t);
      if (!done) start_segment(buffers[i], seats[i], opt, ++segment_index[i]);
    }
  }
  if (recorder) out.record = recorder->finish();
  return out;
}

}  // namespace cleanup::rl
