#include "cleanup/env/scripted_bots.hpp"

#include <array>
#include <deque>
#include <limits>

#include "cleanup/common/errors.hpp"

namespace cleanup::env {

namespace {

constexpr int kUnreachable = std::numeric_limits<int>::max();
constexpr std::array<Pos, 4> kDirs{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};

}  // namespace

std::string_view to_string(BotKind k) {
  switch (k) {
    case BotKind::cooperator: return "cooperator";
    case BotKind::defector: return "defector";
    case BotKind::random: return "random";
    case BotKind::idle: return "idle";
  }
  return "?";
}

Action move_toward(Orientation facing, Pos dir) {
  if (dir == heading(facing)) return Action::move_up;
  if (dir == heading(rotate_left(facing))) return Action::move_left;
  if (dir == heading(rotate_right(facing))) return Action::move_right;
  return Action::move_down;
}

ScriptedBot::ScriptedBot(BotKind kind, const CleanupGame& game, int player, std::uint64_t seed)
    : kind_(kind), game_(&game), player_(player), rng_(seed) {
  const auto& c = game.config();
  const double span = c.h_depletion - c.h_abundance;
  clean_start_ = c.h_abundance + 0.1 * span;
  clean_stop_ = std::max(0.0, c.h_abundance - 0.1 * span);
}

Action ScriptedBot::act(const WorldState& state) {
  switch (kind_) {
    case BotKind::idle: return Action::noop;
    case BotKind::random: return action_from_index(static_cast<int>(rng_.uniform_int(kNumActions)));
    case BotKind::defector: return harvest(state);
    case BotKind::cooperator: {
      const double f = game_->polluted_fraction(state);
      if (cleaning_ && f <= clean_stop_) cleaning_ = false;
      if (!cleaning_ && f >= clean_start_ && state.polluted_count > 0) cleaning_ = true;
      return cleaning_ ? clean(state) : harvest(state);
    }
  }
  return Action::noop;
}

std::vector<int> ScriptedBot::distance_field(const std::vector<Pos>& targets) const {
  const GridMap& map = game_->map();
  std::vector<int> dist(static_cast<std::size_t>(map.cell_count()), kUnreachable);
  std::deque<Pos> queue;
  for (const Pos& t : targets) {
    dist[static_cast<std::size_t>(map.index(t))] = 0;
    queue.push_back(t);
  }
  while (!queue.empty()) {
    const Pos p = queue.front();
    queue.pop_front();
    const int d = dist[static_cast<std::size_t>(map.index(p))];
    for (const Pos& dir : kDirs) {
      const Pos q = p + dir;
      if (!map.walkable(q)) continue;
      auto& dq = dist[static_cast<std::size_t>(map.index(q))];
      if (dq == kUnreachable) {
        dq = d + 1;
        queue.push_back(q);
      }
    }
  }
  return dist;
}

Action ScriptedBot::step_toward(const WorldState& state, const std::vector<int>& distance) {
  const GridMap& map = game_->map();
  const Avatar& me = state.avatars[static_cast<std::size_t>(player_)];
  const int here = distance[static_cast<std::size_t>(map.index(me.pos))];
  std::array<Pos, 4> dirs = kDirs;
  rng_.shuffle(std::span<Pos>(dirs));
  auto occupied = [&](Pos p) {
    for (const auto& a : state.avatars) {
      if (a.pos == p) return true;
    }
    return false;
  };
  for (const Pos& dir : dirs) {
    const Pos q = me.pos + dir;
    if (!map.walkable(q) || occupied(q)) continue;
    if (distance[static_cast<std::size_t>(map.index(q))] < here) return move_toward(me.facing, dir);
  }
  // Blocked: sidestep at random so groups do not jam.
  const Pos dir = dirs[0];
  return move_toward(me.facing, dir);
}

Action ScriptedBot::clean(const WorldState& state) {
  const GridMap& map = game_->map();
  const Avatar& me = state.avatars[static_cast<std::size_t>(player_)];
  auto dirty_in = [&](Orientation o) {
    int n = 0;
    for (const Pos& p : game_->beam_footprint(me.pos, o)) {
      const int slot = map.river_slot(p);
      if (slot >= 0 && state.polluted[static_cast<std::size_t>(slot)]) ++n;
    }
    return n;
  };
  if (dirty_in(me.facing) > 0) return Action::fire_clean;
  const int left = dirty_in(rotate_left(me.facing));
  const int right = dirty_in(rotate_right(me.facing));
  if (left > 0 || right > 0) return left >= right ? Action::rotate_left : Action::rotate_right;
  if (dirty_in(rotate_left(rotate_left(me.facing))) > 0) return Action::rotate_left;

  std::vector<Pos> dirty;
  for (std::size_t k = 0; k < state.polluted.size(); ++k) {
    if (state.polluted[k]) dirty.push_back(map.river_cells()[k]);
  }
  if (dirty.empty()) return Action::noop;
  return step_toward(state, distance_field(dirty));
}

Action ScriptedBot::harvest(const WorldState& state) {
  const GridMap& map = game_->map();
  std::vector<Pos> apples;
  for (std::size_t k = 0; k < state.apples.size(); ++k) {
    if (state.apples[k]) apples.push_back(map.orchard_cells()[k]);
  }
  if (apples.empty()) {
    const Avatar& me = state.avatars[static_cast<std::size_t>(player_)];
    if (map.orchard_slot(me.pos) >= 0) return Action::noop;
    return step_toward(state, distance_field(map.orchard_cells()));
  }
  return step_toward(state, distance_field(apples));
}

}  // namespace cleanup::env

namespace cleanup::env {

EpisodeRecord play_scripted(const CleanupGame& game, std::span<const BotKind> kinds, std::uint64_t seed,
                            Condition condition, std::string preset) {
  const int n = game.config().num_players;
  if (static_cast<int>(kinds.size()) != n) throw ConfigError("play_scripted: one bot kind per player required");
  WorldState state = game.reset(seed);
  std::vector<ScriptedBot> bots;
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    bots.emplace_back(kinds[static_cast<std::size_t>(i)], game, i, derive_seed(seed, "bot", static_cast<std::uint64_t>(i)));
    ids.push_back(std::string(to_string(kinds[static_cast<std::size_t>(i)])) + "_" + std::to_string(i));
  }
  EpisodeRecorder rec(game, state, seed, condition, std::move(ids), std::move(preset));
  std::vector<Action> actions(static_cast<std::size_t>(n));
  while (!game.done(state)) {
    for (std::size_t i = 0; i < bots.size(); ++i) actions[i] = bots[i].act(state);
    const auto ev = game.step(state, actions);
    rec.record(state, actions, ev);
  }
  return rec.finish();
}

BotMix parse_bot_mix(std::string_view s) {
  if (s == "mixed") return BotMix::mixed;
  if (s == "cooperators") return BotMix::cooperators;
  if (s == "defectors") return BotMix::defectors;
  throw ConfigError("bot mix must be mixed, cooperators or defectors, got '" + std::string(s) + "'");
}

std::vector<EpisodeRecord> scripted_corpus(const CleanupGame& game, int episodes, std::uint64_t seed,
                                           Condition condition, BotMix mix, const std::string& preset) {
  if (episodes < 0) throw ConfigError("scripted corpus: episodes must be >= 0");
  const int n = game.config().num_players;
  Rng comp(derive_seed(seed, "composition"));
  std::vector<EpisodeRecord> records;
  records.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    int cooperators = 0;
    switch (mix) {
      case BotMix::mixed: cooperators = static_cast<int>(comp.uniform_int(static_cast<std::uint64_t>(n) + 1)); break;
      case BotMix::cooperators: cooperators = n; break;
      case BotMix::defectors: break;
    }
    std::vector<BotKind> kinds(static_cast<std::size_t>(n), BotKind::defector);
    for (int i = 0; i < cooperators; ++i) kinds[static_cast<std::size_t>(i)] = BotKind::cooperator;
    comp.shuffle(std::span<BotKind>(kinds));
    auto r = play_scripted(game, kinds, derive_seed(seed, "episode", static_cast<std::uint64_t>(e)), condition, preset);
    r.group_id = e;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace cleanup::env
