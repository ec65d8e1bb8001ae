#include "cleanup/server/protocol.hpp"

#include <array>

namespace cleanup::server {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<MessageType, std::string_view>, 10> kNames{{
    {MessageType::join, "join"},
    {MessageType::input, "input"},
    {MessageType::lobby_state, "lobby_state"},
    {MessageType::phase_start, "phase_start"},
    {MessageType::frame, "frame"},
    {MessageType::phase_end, "phase_end"},
    {MessageType::session_end, "session_end"},
    {MessageType::paused, "paused"},
    {MessageType::resumed, "resumed"},
    {MessageType::error, "error"},
}};

std::uint32_t read_length(std::string_view b) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[0])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[3]));
}

json parse_payload(std::string_view payload) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("message is not an object");
  if (!j.contains("v") || !j["v"].is_number_integer()) throw ProtocolError("message has no version");
  if (j["v"].get<int>() > kProtocolVersion) {
    throw ProtocolError("unsupported protocol version " + std::to_string(j["v"].get<int>()));
  }
  message_type(j);
  return j;
}

}  // namespace

std::string_view to_string(MessageType t) {
  for (const auto& [k, name] : kNames) {
    if (k == t) return name;
  }
  return "unknown";
}

std::optional<MessageType> parse_message_type(std::string_view s) {
  for (const auto& [k, name] : kNames) {
    if (name == s) return k;
  }
  return std::nullopt;
}

MessageType message_type(const json& message) {
  const auto it = message.find("type");
  if (it == message.end() || !it->is_string()) throw ProtocolError("message has no type");
  const auto t = parse_message_type(it->get<std::string>());
  if (!t) throw ProtocolError("unknown message type '" + it->get<std::string>() + "'");
  return *t;
}

json make_message(MessageType type, json fields) {
  fields["v"] = kProtocolVersion;
  fields["type"] = std::string(to_string(type));
  return fields;
}

std::string encode(const json& message) {
  const std::string payload = message.dump();
  if (payload.size() > kMaxPayload) throw ProtocolError("message exceeds the maximum payload");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += payload;
  return out;
}

json decode(std::string_view bytes) {
  if (bytes.size() < 4) throw ProtocolError("frame shorter than its length prefix");
  const std::uint32_t n = read_length(bytes);
  if (n > kMaxPayload) throw ProtocolError("declared payload exceeds the maximum");
  if (bytes.size() - 4 != n) {
    throw ProtocolError("length prefix " + std::to_string(n) + " does not match payload of " +
                        std::to_string(bytes.size() - 4) + " bytes");
  }
  return parse_payload(bytes.substr(4));
}

void FrameReader::feed(std::string_view bytes) { buf_.append(bytes); }

std::optional<json> FrameReader::next() {
  if (buf_.size() < 4) return std::nullopt;
  const std::uint32_t n = read_length(buf_);
  if (n > kMaxPayload) throw ProtocolError("declared payload exceeds the maximum");
  if (buf_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  json j = parse_payload(std::string_view(buf_).substr(4, n));
  buf_.erase(0, 4 + static_cast<std::size_t>(n));
  return j;
}

}  // namespace cleanup::server
