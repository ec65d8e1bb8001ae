#pragma once

#include <chrono>
#include <optional>
#include <vector>

#include "cleanup/env/game.hpp"

namespace cleanup::server {

using Millis = std::chrono::milliseconds;

enum class InputDecision {
  accepted,  // opened a new acceptance window
  replaced,  // same window, pending action not yet consumed: latest wins
  rejected,  // same window and its action was already consumed by a tick
};

/// Per-participant single-slot input mailbox. At most one action per
/// participant is executed per acceptance window.
class InputBuffer {
 public:
  explicit InputBuffer(int participants, Millis window = Millis(100));

  InputDecision offer(int participant, env::Action action, Millis now);

  /// Pending action for the next tick, clearing the slot.
  std::optional<env::Action> take(int participant);

  void clear();
  int participants() const { return static_cast<int>(slots_.size()); }
  Millis window() const { return window_; }

 private:
  struct Slot {
    std::optional<env::Action> pending;
    std::optional<Millis> window_start;
  };
  Millis window_;
  std::vector<Slot> slots_;
};

}  // namespace cleanup::server
