#include "cleanup/server/input_buffer.hpp"

#include "cleanup/common/errors.hpp"

namespace cleanup::server {

InputBuffer::InputBuffer(int participants, Millis window) : window_(window) {
  if (participants < 1) throw ConfigError("input buffer: need at least one participant");
  if (window.count() < 0) throw ConfigError("input buffer: negative window");
  slots_.resize(static_cast<std::size_t>(participants));
}

InputDecision InputBuffer::offer(int participant, env::Action action, Millis now) {
  if (participant < 0 || participant >= participants()) throw ConfigError("input buffer: no such participant");
  auto& s = slots_[static_cast<std::size_t>(participant)];
  if (!s.window_start || now - *s.window_start >= window_) {
    s.window_start = now;
    s.pending = action;
    return InputDecision::accepted;
  }
  if (s.pending) {
    s.pending = action;
    return InputDecision::replaced;
  }
  return InputDecision::rejected;
}

std::optional<env::Action> InputBuffer::take(int participant) {
  auto& s = slots_.at(static_cast<std::size_t>(participant));
  auto a = s.pending;
  s.pending.reset();
  return a;
}

void InputBuffer::clear() {
  for (auto& s : slots_) s.pending.reset();
}

}  // namespace cleanup::server
