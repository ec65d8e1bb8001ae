#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cleanup::server {

/// Wire format of the play-server channel.
///
/// Every message is a 4-byte big-endian payload length followed by a UTF-8
/// JSON object. Over the websocket transport each binary websocket message
/// carries exactly one such frame. Every object has
///
///     "v"     protocol major version (kProtocolVersion)
///     "type"  one of the message types below
///
/// Client to server:
///   join     {"token"?: string}                 take a lobby slot, or resume one with its token
///   input    {"action": 0..8}                   action id, see env::Action
///
/// Server to client:
///   lobby_state   {"session_id", "slot", "token", "connected", "needed"}
///   phase_start   {"phase": "tutorial"|"episode", "index", "condition"?, "task_index"?,
///                  "episode_index"?, "topic"?, "goal"?, "steps", "window"}
///   frame         {"phase", "index", "t", "keyframe", "tiles"?: [row strings] on keyframes,
///                  "delta": [[row, col, glyph], ...], "facing",
///                  "hud": {"episode_earnings", "cumulative_earnings", "tickets",
///                          "own_contribution", "peer_contributions"? (identifiable only)}}
///   phase_end     {"phase", "index", "episode_score", "cumulative_score", "goal_met"?}
///   session_end   {"valid", "reason"?, "summary": {...}}
///   paused        {"reason", "resume_deadline_ms"}
///   resumed       {}
///   error         {"message"}
///
/// Tile glyphs: '#' wall, '.' ground, 'R' clean river, '~' polluted river,
/// 'O' empty orchard, 'a' apple, '@' self, '1'..'4' identifiable peers by
/// slot order, 'L' anonymous peer.
inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxPayload = 1 << 20;

enum class MessageType {
  join,
  input,
  lobby_state,
  phase_start,
  frame,
  phase_end,
  session_end,
  paused,
  resumed,
  error,
};

std::string_view to_string(MessageType t);
std::optional<MessageType> parse_message_type(std::string_view s);

/// Builds a versioned message body.
nlohmann::json make_message(MessageType type, nlohmann::json fields = nlohmann::json::object());

/// Length-prefixed encoding of one message.
std::string encode(const nlohmann::json& message);

/// Decodes exactly one frame. Throws ProtocolError on a bad prefix, a
/// length mismatch, malformed JSON, a newer version or an unknown type.
nlohmann::json decode(std::string_view bytes);

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Splits a byte stream into frames.
class FrameReader {
 public:
  void feed(std::string_view bytes);
  /// Next complete message, if any.
  std::optional<nlohmann::json> next();
  std::size_t buffered() const { return buf_.size(); }

 private:
  std::string buf_;
};

MessageType message_type(const nlohmann::json& message);

}  // namespace cleanup::server
