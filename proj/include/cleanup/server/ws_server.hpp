#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "cleanup/server/session.hpp"

namespace cleanup::server {

struct ServerOptions {
  std::string address = "0.0.0.0";
  unsigned short port = 8080;  // 0 = ephemeral
  int sessions = 1;
  std::optional<ConditionOrder> order;  // nullopt = alternate
  std::filesystem::path static_dir;     // web client bundle; empty = no static files
  std::filesystem::path out_dir = "sessions";
  SessionConfig base;  // group_id, session_id and seed are set per session
  std::function<void(const std::string&)> log;
};

/// MIME type for a static file name.
std::string_view mime_type(std::string_view path);

/// Resolves a request target inside `root`; nullopt for anything escaping it.
std::optional<std::filesystem::path> resolve_static(const std::filesystem::path& root, std::string_view target);

/// HTTP server for the client bundle plus the websocket play channel at
/// /ws. A single I/O thread owns every session, so session state is only
/// touched from one place.
class PlayServer {
 public:
  explicit PlayServer(ServerOptions options);
  ~PlayServer();

  /// Bound port, valid after construction.
  unsigned short port() const;

  /// Serves until every session has ended (or stop() is called), writing
  /// each session's records and score summary under out_dir/<session_id>/.
  void run();
  void stop();

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace cleanup::server
