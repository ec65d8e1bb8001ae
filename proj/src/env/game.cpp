#include "cleanup/env/game.hpp"

#include <algorithm>
#include <numeric>

#include "cleanup/common/digest.hpp"
#include "cleanup/common/errors.hpp"

namespace cleanup::env {

std::string_view to_string(Action a) {
  switch (a) {
    case Action::move_up: return "move-up";
    case Action::move_down: return "move-down";
    case Action::move_left: return "move-left";
    case Action::move_right: return "move-right";
    case Action::rotate_left: return "rotate-left";
    case Action::rotate_right: return "rotate-right";
    case Action::fire_clean: return "fire-clean";
    case Action::fire_ticket: return "fire-ticket";
    case Action::noop: return "no-op";
  }
  return "?";
}

Action action_from_index(int index) {
  if (index < 0 || index >= kNumActions) {
    throw ConfigError("action index " + std::to_string(index) + " outside [0, 9)");
  }
  return static_cast<Action>(index);
}

Pos heading(Orientation o) {
  switch (o) {
    case Orientation::north: return {0, -1};
    case Orientation::east: return {1, 0};
    case Orientation::south: return {0, 1};
    case Orientation::west: return {-1, 0};
  }
  return {0, 0};
}

Orientation rotate_left(Orientation o) {
  return static_cast<Orientation>((static_cast<int>(o) + 3) % 4);
}

Orientation rotate_right(Orientation o) {
  return static_cast<Orientation>((static_cast<int>(o) + 1) % 4);
}

namespace {

std::optional<Pos> move_delta(Action a, Orientation facing) {
  switch (a) {
    case Action::move_up: return heading(facing);
    case Action::move_down: {
      const Pos h = heading(facing);
      return Pos{-h.x, -h.y};
    }
    case Action::move_left: return heading(rotate_left(facing));
    case Action::move_right: return heading(rotate_right(facing));
    default: return std::nullopt;
  }
}

}  // namespace

CleanupGame::CleanupGame(EnvConfig config, std::shared_ptr<const GridMap> map)
    : config_(std::move(config)), map_(std::move(map)) {
  config_.validate();
  if (!map_) throw ConfigError("game: map is null");
  if (static_cast<int>(map_->spawn_cells().size()) < config_.num_players) {
    throw ConfigError("game: map has fewer spawn cells than players");
  }
}

WorldState CleanupGame::reset(std::uint64_t seed) const {
  WorldState s;
  s.rng = Rng(seed);
  const auto river = map_->river_cells().size();
  const auto orchard = map_->orchard_cells().size();
  const bool training = config_.initial_mode == InitialMode::training_start;
  s.polluted.assign(river, training ? 1 : 0);
  s.apples.assign(orchard, training ? 0 : 1);
  s.polluted_count = training ? static_cast<int>(river) : 0;
  s.apple_count = training ? 0 : static_cast<int>(orchard);

  std::vector<Pos> spawns = map_->spawn_cells();
  s.rng.shuffle(std::span<Pos>(spawns));
  s.avatars.resize(static_cast<std::size_t>(config_.num_players));
  for (std::size_t i = 0; i < s.avatars.size(); ++i) {
    Avatar& a = s.avatars[i];
    a.pos = spawns[i];
    a.facing = static_cast<Orientation>(s.rng.uniform_int(4));
    a.tickets_remaining = config_.ticket_budget;
  }
  return s;
}

double CleanupGame::polluted_fraction(const WorldState& state) const {
  const auto river = map_->river_cells().size();
  return river == 0 ? 0.0 : static_cast<double>(state.polluted_count) / static_cast<double>(river);
}

std::vector<Pos> CleanupGame::beam_footprint(Pos origin, Orientation facing) const {
  std::vector<Pos> cells;
  const Pos fwd = heading(facing);
  const Pos side = heading(rotate_right(facing));
  const int half = config_.beam_width / 2;
  for (int k = 0; k <= 2 * half; ++k) {
    // 0, -1, +1, -2, +2, ...
    const int offset = (k == 0) ? 0 : ((k % 2 == 1) ? -(k + 1) / 2 : k / 2);
    for (int d = 1; d <= config_.beam_length; ++d) {
      const Pos p{origin.x + d * fwd.x + offset * side.x, origin.y + d * fwd.y + offset * side.y};
      if (!map_->walkable(p)) break;
      cells.push_back(p);
    }
  }
  return cells;
}

StepEvents CleanupGame::step(WorldState& state, std::span<const Action> actions) const {
  if (done(state)) throw StateError("step: episode already finished at t=" + std::to_string(state.t));
  const auto n = state.avatars.size();
  if (actions.size() != n) {
    throw ConfigError("step: expected " + std::to_string(n) + " actions, got " +
                      std::to_string(actions.size()));
  }
  StepEvents events;
  events.players.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    if (actions[i] == Action::rotate_left) state.avatars[i].facing = rotate_left(state.avatars[i].facing);
    if (actions[i] == Action::rotate_right) state.avatars[i].facing = rotate_right(state.avatars[i].facing);
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  state.rng.shuffle(std::span<int>(order));

  std::vector<int> occupant(static_cast<std::size_t>(map_->cell_count()), -1);
  for (std::size_t i = 0; i < n; ++i) occupant[static_cast<std::size_t>(map_->index(state.avatars[i].pos))] = static_cast<int>(i);

  std::vector<char> moved(n, 0);
  for (int i : order) {
    Avatar& a = state.avatars[static_cast<std::size_t>(i)];
    const auto delta = move_delta(actions[static_cast<std::size_t>(i)], a.facing);
    if (!delta) continue;
    const Pos target = a.pos + *delta;
    if (!map_->walkable(target)) continue;
    auto& slot = occupant[static_cast<std::size_t>(map_->index(target))];
    if (slot != -1) continue;
    occupant[static_cast<std::size_t>(map_->index(a.pos))] = -1;
    slot = i;
    a.pos = target;
    moved[static_cast<std::size_t>(i)] = 1;
  }

  for (int i : order) {
    const auto ui = static_cast<std::size_t>(i);
    const Action act = actions[ui];
    if (act != Action::fire_clean && act != Action::fire_ticket) continue;
    Avatar& a = state.avatars[ui];
    const auto footprint = beam_footprint(a.pos, a.facing);
    if (act == Action::fire_clean) {
      for (const Pos& p : footprint) {
        const int slot = map_->river_slot(p);
        if (slot >= 0 && state.polluted[static_cast<std::size_t>(slot)]) {
          state.polluted[static_cast<std::size_t>(slot)] = 0;
          --state.polluted_count;
          ++events.players[ui].cleaned_cells;
        }
      }
    } else {
      if (a.tickets_remaining && *a.tickets_remaining <= 0) continue;
      // Nearest avatar by distance along the beam; centre lane wins ties.
      const Pos fwd = heading(a.facing);
      int best = -1, best_dist = 1 << 30;
      for (const Pos& p : footprint) {
        const int who = occupant[static_cast<std::size_t>(map_->index(p))];
        if (who < 0 || who == i) continue;
        const int dist = (p.x - a.pos.x) * fwd.x + (p.y - a.pos.y) * fwd.y;
        if (dist < best_dist) {
          best_dist = dist;
          best = who;
        }
      }
      if (best < 0) continue;
      const auto ub = static_cast<std::size_t>(best);
      if (a.tickets_remaining) --*a.tickets_remaining;
      a.score -= config_.ticket_cost;
      events.players[ui].reward -= config_.ticket_cost;
      ++events.players[ui].tickets_issued;
      state.avatars[ub].score -= config_.ticket_penalty;
      events.players[ub].reward -= config_.ticket_penalty;
      ++events.players[ub].tickets_received;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!moved[i]) continue;
    const int slot = map_->orchard_slot(state.avatars[i].pos);
    if (slot >= 0 && state.apples[static_cast<std::size_t>(slot)]) {
      state.apples[static_cast<std::size_t>(slot)] = 0;
      --state.apple_count;
      state.avatars[i].score += config_.apple_reward;
      events.players[i].reward += config_.apple_reward;
      ++events.players[i].apples_collected;
    }
  }

  const double fraction = polluted_fraction(state);
  spawn_pollution(state, fraction);
  regrow_apples(state, fraction);

  for (auto& p : events.players) p.contributed = p.cleaned_cells >= 1 ? 1 : 0;
  ++state.t;
  return events;
}

bool CleanupGame::spawn_pollution(WorldState& state, double polluted_fraction) const {
  if (!state.rng.bernoulli(pollution_spawn_prob(polluted_fraction, config_))) return false;
  const int clean = static_cast<int>(state.polluted.size()) - state.polluted_count;
  if (clean <= 0) return false;
  auto k = static_cast<int>(state.rng.uniform_int(static_cast<std::uint64_t>(clean)));
  for (auto& cell : state.polluted) {
    if (cell) continue;
    if (k-- == 0) {
      cell = 1;
      ++state.polluted_count;
      return true;
    }
  }
  return false;
}

int CleanupGame::regrow_apples(WorldState& state, double polluted_fraction) const {
  const double p = apple_regrowth_prob(polluted_fraction, config_);
  const auto& orchard = map_->orchard_cells();
  int grown = 0;
  for (std::size_t k = 0; k < orchard.size(); ++k) {
    if (state.apples[k]) continue;
    const bool occupied = std::any_of(state.avatars.begin(), state.avatars.end(),
                                      [&](const Avatar& a) { return a.pos == orchard[k]; });
    if (occupied) continue;
    if (state.rng.bernoulli(p)) {
      state.apples[k] = 1;
      ++state.apple_count;
      ++grown;
    }
  }
  return grown;
}

std::uint64_t CleanupGame::digest(const WorldState& state) const {
  Fnv1a h;
  h.add(state.t);
  h.add_bytes(state.polluted.data(), state.polluted.size());
  h.add_bytes(state.apples.data(), state.apples.size());
  for (const Avatar& a : state.avatars) {
    h.add(a.pos.x);
    h.add(a.pos.y);
    h.add(a.facing);
    h.add(a.score);
    h.add(a.tickets_remaining.value_or(-1));
  }
  return h.value();
}

}  // namespace cleanup::env
