#include "cleanup/server/ws_server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

#include "cleanup/common/errors.hpp"
#include "cleanup/io/record_io.hpp"
#include "cleanup/server/protocol.hpp"

namespace cleanup::server {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

std::string_view mime_type(std::string_view path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript; charset=utf-8";
  if (ext == ".css") return "text/css; charset=utf-8";
  if (ext == ".json" || ext == ".map") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  if (ext == ".wasm") return "application/wasm";
  if (ext == ".txt") return "text/plain; charset=utf-8";
  return "application/octet-stream";
}

std::optional<std::filesystem::path> resolve_static(const std::filesystem::path& root, std::string_view target) {
  std::string path(target.substr(0, target.find_first_of("?#")));
  if (path.empty() || path[0] != '/') return std::nullopt;
  if (path.back() == '/') path += "index.html";
  const std::filesystem::path rel = std::filesystem::path(path.substr(1)).lexically_normal();
  for (const auto& part : rel) {
    if (part == "..") return std::nullopt;
  }
  if (rel.is_absolute() || rel.empty()) return std::nullopt;
  return root / rel;
}

namespace {

class Connection;

}  // namespace

struct PlayServer::Impl {
  explicit Impl(ServerOptions o);

  Millis now() const {
    return std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - epoch);
  }
  void log(const std::string& s) const {
    if (options.log) options.log(s);
  }

  void accept();
  void on_join(const std::shared_ptr<Connection>& c, const std::optional<std::string>& token);
  void on_input(const std::shared_ptr<Connection>& c, int action);
  void on_close(const std::shared_ptr<Connection>& c);
  void dispatch(std::size_t session, std::vector<Outbound>& out);
  void pump();
  void open_session();
  void persist(std::size_t session);
  void begin_shutdown();

  ServerOptions options;
  asio::io_context io;
  tcp::acceptor acceptor;
  asio::steady_timer timer;
  std::chrono::steady_clock::time_point epoch = std::chrono::steady_clock::now();
  OrderAssigner orders;
  std::vector<std::unique_ptr<Session>> sessions;
  std::vector<bool> persisted;
  std::map<std::pair<std::size_t, int>, std::weak_ptr<Connection>> seats;
  std::vector<std::weak_ptr<Connection>> connections;
  int live = 0;  // accepted websocket connections not yet closed
  bool stopping = false;
};

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, PlayServer::Impl& server) : ws_(std::move(socket)), server_(server) {}

  void start(http::request<http::string_body> req) {
    ws_.binary(true);
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      ++self->server_.live;
      self->server_.connections.push_back(self);
      if (self->server_.stopping) {
        self->finish();
      }
      self->read();
    });
  }

  void send(const json& message) {
    queue_.push_back(encode(message));
    if (queue_.size() == 1) write();
  }

  /// Closing handshake once queued messages have been written.
  void finish() {
    closing_ = true;
    if (queue_.empty()) shut();
  }

  void close() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
  }

  std::optional<std::pair<std::size_t, int>> seat;

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->server_.on_close(self);
        return;
      }
      const std::string bytes = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->handle(bytes);
      self->read();
    });
  }

  void handle(const std::string& bytes) {
    try {
      const json m = decode(bytes);
      switch (message_type(m)) {
        case MessageType::join: {
          std::optional<std::string> token;
          if (m.contains("token") && m["token"].is_string()) token = m["token"].get<std::string>();
          server_.on_join(shared_from_this(), token);
          break;
        }
        case MessageType::input: {
          if (!m.contains("action") || !m["action"].is_number_integer()) throw ProtocolError("input without action");
          server_.on_input(shared_from_this(), m["action"].get<int>());
          break;
        }
        default: throw ProtocolError("clients may only send join and input");
      }
    } catch (const std::exception& e) {
      send(make_message(MessageType::error, {{"message", e.what()}}));
    }
  }

  void write() {
    ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->queue_.pop_front();
      if (!self->queue_.empty()) {
        self->write();
      } else if (self->closing_) {
        self->shut();
      }
    });
  }

  void shut() {
    if (shut_) return;
    shut_ = true;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool closing_ = false;
  bool shut_ = false;
  PlayServer::Impl& server_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, PlayServer::Impl& server) : stream_(std::move(socket)), server_(server) {}

  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->handle();
    });
  }

 private:
  void handle() {
    if (websocket::is_upgrade(req_)) {
      if (req_.target() != "/ws") return reply(http::status::not_found, "text/plain", "no such channel\n");
      stream_.expires_never();
      std::make_shared<Connection>(stream_.release_socket(), server_)->start(std::move(req_));
      return;
    }
    if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
      return reply(http::status::method_not_allowed, "text/plain", "method not allowed\n");
    }
    if (server_.options.static_dir.empty()) return reply(http::status::not_found, "text/plain", "no client bundle\n");
    const auto path = resolve_static(server_.options.static_dir, std::string_view(req_.target().data(), req_.target().size()));
    if (!path) return reply(http::status::bad_request, "text/plain", "bad path\n");
    std::ifstream in(*path, std::ios::binary);
    if (!in) return reply(http::status::not_found, "text/plain", "not found\n");
    std::ostringstream body;
    body << in.rdbuf();
    reply(http::status::ok, mime_type(path->string()), body.str());
  }

  void reply(http::status status, std::string_view type, std::string body) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::server, "cleanup-play");
    res->set(http::field::content_type, std::string(type));
    res->keep_alive(req_.keep_alive());
    if (req_.method() == http::verb::head) {
      res->content_length(body.size());
    } else {
      res->body() = std::move(body);
      res->prepare_payload();
    }
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (res->keep_alive()) {
        self->read();
      } else {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
      }
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  PlayServer::Impl& server_;
};

}  // namespace

PlayServer::Impl::Impl(ServerOptions o)
    : options(std::move(o)), acceptor(io), timer(io), orders(options.order) {
  if (options.sessions < 1) throw ConfigError("serve: --sessions must be >= 1");
  options.base.validate();
  const tcp::endpoint ep(asio::ip::make_address(options.address), options.port);
  acceptor.open(ep.protocol());
  acceptor.set_option(asio::socket_base::reuse_address(true));
  acceptor.bind(ep);
  acceptor.listen();
  open_session();
}

void PlayServer::Impl::open_session() {
  SessionConfig cfg = options.base;
  const auto k = sessions.size();
  cfg.group_id = static_cast<int>(k);
  cfg.session_id = "session-" + std::to_string(k);
  cfg.seed = derive_seed(options.base.seed, "session", k);
  sessions.push_back(std::make_unique<Session>(std::move(cfg), orders.next()));
  persisted.push_back(false);
  log("opened " + sessions.back()->config().session_id + " (" + std::string(to_string(sessions.back()->order())) + ")");
}

void PlayServer::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<HttpSession>(std::move(socket), *this)->read();
    if (!stopping) accept();
  });
}

void PlayServer::Impl::dispatch(std::size_t session, std::vector<Outbound>& out) {
  for (auto& o : out) {
    const auto it = seats.find({session, o.slot});
    if (it == seats.end()) continue;
    if (auto c = it->second.lock()) c->send(o.message);
  }
  out.clear();
}

void PlayServer::Impl::on_join(const std::shared_ptr<Connection>& c, const std::optional<std::string>& token) {
  if (c->seat) throw ProtocolError("already joined");
  std::vector<Outbound> out;
  const Millis t = now();
  for (std::size_t k = 0; k < sessions.size(); ++k) {
    auto& s = *sessions[k];
    if (!token && s.state() != Session::State::lobby) continue;
    // Register a placeholder seat first so messages produced by the join reach this connection.
    for (int slot = 0; slot < kGroupSize; ++slot) {
      if (!s.connected(slot)) seats[{k, slot}] = c;
    }
    const auto slot = s.join(token, t, out);
    for (int i = 0; i < kGroupSize; ++i) {
      const auto it = seats.find({k, i});
      if (it != seats.end() && it->second.lock() == c && (!slot || i != *slot)) seats.erase(it);
    }
    if (!slot) continue;
    c->seat = {{k, *slot}};
    dispatch(k, out);
    log(s.config().session_id + ": slot " + std::to_string(*slot) + (token ? " rejoined" : " joined"));
    if (s.state() != Session::State::lobby && sessions.back()->state() != Session::State::lobby &&
        static_cast<int>(sessions.size()) < options.sessions) {
      open_session();
    }
    pump();
    return;
  }
  throw ProtocolError(token ? "unknown or active session token" : "no open lobby");
}

void PlayServer::Impl::on_input(const std::shared_ptr<Connection>& c, int action) {
  if (!c->seat) throw ProtocolError("input before join");
  sessions[c->seat->first]->input(c->seat->second, action, now());
}

void PlayServer::Impl::on_close(const std::shared_ptr<Connection>& c) {
  --live;
  if (stopping) {
    if (live == 0) io.stop();
    return;
  }
  if (!c->seat) return;
  const auto [k, slot] = *c->seat;
  std::vector<Outbound> out;
  sessions[k]->disconnect(slot, now(), out);
  seats.erase({k, slot});
  dispatch(k, out);
  log(sessions[k]->config().session_id + ": slot " + std::to_string(slot) + " disconnected");
  pump();
}

void PlayServer::Impl::persist(std::size_t k) {
  const auto& s = *sessions[k];
  const auto dir = options.out_dir / s.config().session_id;
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < s.records().size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "episode_%02zu.jsonl", i + 1);
    io::write_record(dir / name, s.records()[i]);
  }
  json j = {{"session_id", s.config().session_id},
            {"order", std::string(to_string(s.order()))},
            {"valid", s.valid()},
            {"scores", s.score_summary().to_json()}};
  std::ofstream(dir / "summary.json") << j.dump(2) << '\n';
  log(s.config().session_id + (s.valid() ? ": complete" : ": aborted, marked invalid"));
}

void PlayServer::Impl::pump() {
  const Millis t = now();
  std::optional<Millis> next;
  bool all_done = static_cast<int>(sessions.size()) == options.sessions;
  for (std::size_t k = 0; k < sessions.size(); ++k) {
    std::vector<Outbound> out;
    sessions[k]->advance(t, out);
    dispatch(k, out);
    if (sessions[k]->done() && !persisted[k]) {
      persist(k);
      persisted[k] = true;
    }
    all_done = all_done && sessions[k]->done();
    if (const auto d = sessions[k]->next_deadline()) next = next ? std::min(*next, *d) : *d;
  }
  if (all_done) {
    begin_shutdown();
    return;
  }
  if (!next) return;
  timer.expires_at(epoch + *next);
  timer.async_wait([this](beast::error_code ec) {
    if (!ec) pump();
  });
}

void PlayServer::Impl::begin_shutdown() {
  if (stopping) return;
  stopping = true;
  beast::error_code ec;
  acceptor.close(ec);
  for (const auto& w : connections) {
    if (auto c = w.lock()) c->finish();
  }
  if (live == 0) {
    io.stop();
    return;
  }
  // Clients that never answer the closing handshake are cut off.
  timer.expires_after(std::chrono::seconds(5));
  timer.async_wait([this](beast::error_code e) {
    if (!e) io.stop();
  });
}

PlayServer::PlayServer(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
PlayServer::~PlayServer() = default;

unsigned short PlayServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void PlayServer::run() {
  impl_->accept();
  impl_->log("listening on " + impl_->options.address + ":" + std::to_string(port()));
  impl_->io.run();
  for (const auto& w : impl_->connections) {
    if (auto c = w.lock()) c->close();
  }
}

void PlayServer::stop() {
  asio::post(impl_->io, [this] {
    impl_->stopping = true;
    beast::error_code ec;
    impl_->acceptor.close(ec);
    impl_->io.stop();
  });
}

}  // namespace cleanup::server
