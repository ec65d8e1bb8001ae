#include <doctest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <filesystem>
#include <fstream>
#include <thread>
#include <unistd.h>

#include "cleanup/common/errors.hpp"
#include "cleanup/io/record_io.hpp"
#include "cleanup/io/replay.hpp"
#include "cleanup/server/frame.hpp"
#include "cleanup/server/input_buffer.hpp"
#include "cleanup/server/protocol.hpp"
#include "cleanup/server/session.hpp"
#include "cleanup/server/tutorials.hpp"
#include "cleanup/server/ws_server.hpp"

using namespace cleanup;
using namespace cleanup::server;
using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

std::vector<json> of_type(const std::vector<Outbound>& out, MessageType t, int slot = -1) {
  std::vector<json> r;
  for (const auto& o : out) {
    if (message_type(o.message) == t && (slot < 0 || o.slot == slot)) r.push_back(o.message);
  }
  return r;
}

SessionConfig quick_config(int steps = 2000) {
  SessionConfig c;
  c.env.episode_length = steps;
  c.episodes_per_condition = 1;
  c.seed = 31;
  return c;
}

// Fills the lobby and returns every participant's token.
std::vector<std::string> fill(Session& s, Millis now, std::vector<Outbound>& out) {
  std::vector<std::string> tokens;
  for (int i = 0; i < kGroupSize; ++i) {
    const auto slot = s.join(std::nullopt, now, out);
    REQUIRE(slot.has_value());
    CHECK(*slot == i);
  }
  for (int i = 0; i < kGroupSize; ++i) {
    const auto lobby = of_type(out, MessageType::lobby_state, i);
    tokens.push_back(lobby.back()["token"].get<std::string>());
  }
  return tokens;
}

// Drives the session with random inputs every tick until `until` or the end.
Millis drive(Session& s, Millis from, Millis until, std::vector<Outbound>& out, Rng& rng) {
  Millis now = from;
  while (!s.done() && now < until) {
    const auto next = s.next_deadline();
    if (!next) break;
    now = std::max(now, *next);
    if (now > until) break;
    for (int i = 0; i < kGroupSize; ++i) {
      if (s.connected(i)) s.input(i, static_cast<int>(rng.uniform_int(9)), now);
    }
    s.advance(now, out);
  }
  return now;
}

}  // namespace

TEST_CASE("frames round trip through the codec") {
  const auto m = make_message(MessageType::input, {{"action", 3}});
  CHECK(m["v"] == kProtocolVersion);
  const auto bytes = encode(m);
  CHECK(bytes.size() == 4 + m.dump().size());
  CHECK(static_cast<unsigned char>(bytes[3]) == m.dump().size());
  CHECK(decode(bytes) == m);
  CHECK(message_type(decode(bytes)) == MessageType::input);

  CHECK_THROWS_AS(decode(bytes.substr(0, bytes.size() - 1)), ProtocolError);
  CHECK_THROWS_AS(decode("ab"), ProtocolError);
  auto newer = m;
  newer["v"] = kProtocolVersion + 1;
  CHECK_THROWS_AS(decode(encode(newer)), ProtocolError);
  auto unknown = m;
  unknown["type"] = "teleport";
  CHECK_THROWS_AS(decode(encode(unknown)), ProtocolError);
  std::string junk = encode(m);
  junk[4] = '!';
  CHECK_THROWS_AS(decode(junk), ProtocolError);
  for (const char* name : {"join", "input", "lobby_state", "phase_start", "frame", "phase_end", "session_end", "paused",
                           "resumed", "error"}) {
    const auto t = parse_message_type(name);
    REQUIRE(t.has_value());
    CHECK(to_string(*t) == name);
  }
}

TEST_CASE("frame reader splits a byte stream") {
  const auto a = make_message(MessageType::join);
  const auto b = make_message(MessageType::input, {{"action", 7}});
  const auto stream = encode(a) + encode(b);
  FrameReader r;
  for (std::size_t i = 0; i < stream.size(); i += 3) r.feed(std::string_view(stream).substr(i, 3));
  CHECK(r.next() == a);
  CHECK(r.next() == b);
  CHECK_FALSE(r.next().has_value());
  CHECK(r.buffered() == 0);
}

TEST_CASE("one action per participant per input window") {
  InputBuffer buf(2, 100ms);
  CHECK(buf.offer(0, env::Action::move_up, 0ms) == InputDecision::accepted);
  CHECK(buf.offer(0, env::Action::move_left, 30ms) == InputDecision::replaced);
  CHECK(buf.offer(0, env::Action::fire_clean, 90ms) == InputDecision::replaced);
  int executed = 0;
  std::optional<env::Action> last;
  for (auto a = buf.take(0); a; a = buf.take(0)) {
    ++executed;
    last = a;
  }
  CHECK(executed == 1);
  CHECK(last == env::Action::fire_clean);
  CHECK(buf.offer(0, env::Action::move_up, 95ms) == InputDecision::rejected);
  CHECK_FALSE(buf.take(0).has_value());
  CHECK(buf.offer(0, env::Action::move_up, 100ms) == InputDecision::accepted);
  CHECK(buf.offer(1, env::Action::noop, 100ms) == InputDecision::accepted);
}

TEST_CASE("condition orders") {
  OrderAssigner auto_order;
  CHECK(auto_order.next() == ConditionOrder::identifiable_first);
  CHECK(auto_order.next() == ConditionOrder::anonymous_first);
  CHECK(auto_order.next() == ConditionOrder::identifiable_first);
  OrderAssigner fixed(ConditionOrder::anonymous_first);
  CHECK(fixed.next() == ConditionOrder::anonymous_first);
  CHECK(fixed.next() == ConditionOrder::anonymous_first);
  CHECK_FALSE(parse_order("auto").has_value());
  CHECK(parse_order("anonymous-first") == ConditionOrder::anonymous_first);
  CHECK_THROWS_AS(parse_order("sideways"), ConfigError);

  SessionConfig c;
  Session idf(c, ConditionOrder::identifiable_first);
  Session anf(c, ConditionOrder::anonymous_first);
  for (int k = 0; k < 14; ++k) {
    CHECK(idf.condition_of(k) == (k < 7 ? Condition::identifiable : Condition::anonymous));
    CHECK(anf.condition_of(k) == (k < 7 ? Condition::anonymous : Condition::identifiable));
  }
}

TEST_CASE("a full session under a simulated clock") {
  Session s(quick_config(), ConditionOrder::anonymous_first);
  std::vector<Outbound> out;
  fill(s, 0ms, out);
  CHECK(s.state() == Session::State::episode);
  Rng rng(1);
  drive(s, 0ms, Millis(10'000'000), out, rng);
  REQUIRE(s.valid());

  // Two episodes of 2000 ticks at 60 ms with the pause between them.
  const auto starts = of_type(out, MessageType::phase_start, 0);
  REQUIRE(starts.size() == 2);
  CHECK(starts[0]["condition"] == "anonymous");
  CHECK(starts[0]["task_index"] == 1);
  CHECK(starts[1]["condition"] == "identifiable");
  CHECK(starts[1]["task_index"] == 2);
  CHECK(starts[0]["window"] == 27);

  // An initial keyframe, then one frame per tick.
  const auto frames = of_type(out, MessageType::frame, 2);
  REQUIRE(frames.size() == 4002);
  CHECK(frames[0]["keyframe"] == true);
  CHECK(frames[0]["t"] == 0);
  CHECK(frames[2000]["t"] == 2000);
  CHECK(frames[2001]["keyframe"] == true);
  CHECK(frames[0]["tiles"].size() == 27);
  CHECK(frames[1]["keyframe"] == false);
  CHECK_FALSE(frames[1].contains("tiles"));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const bool anon = i < 2001;
    CHECK(frames[i]["hud"].contains("peer_contributions") == !anon);
  }
  CHECK(frames[2500]["hud"]["peer_contributions"].size() == 4);
  // Glyph alphabet by condition.
  const auto tiles_text = [](const json& f) {
    std::string all;
    for (const auto& row : f["tiles"]) all += row.get<std::string>();
    return all;
  };
  CHECK(tiles_text(frames[0]).find_first_of("1234") == std::string::npos);
  CHECK(tiles_text(frames[2001]).find('L') == std::string::npos);
  CHECK(tiles_text(frames[0]).find('@') != std::string::npos);

  const auto& recs = s.records();
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].steps.size() == 2000);
  CHECK(recs[0].condition == Condition::anonymous);
  CHECK(recs[1].task_index == 2);
  CHECK(recs[0].preset == "human-paper");
  for (const auto& r : recs) CHECK(io::replay(r, s.config().env).steps == 2000);

  // Score summary is the sum of recorded rewards.
  const auto summary = s.score_summary();
  for (int p = 0; p < kGroupSize; ++p) {
    double total = 0;
    for (const auto& r : recs) total += env::totals(r).extrinsic[static_cast<std::size_t>(p)];
    CHECK(summary.cumulative[static_cast<std::size_t>(p)] == doctest::Approx(total).epsilon(1e-12));
  }
  const auto end = of_type(out, MessageType::session_end, 4);
  REQUIRE(end.size() == 1);
  CHECK(end[0]["valid"] == true);
  CHECK(end[0]["summary"] == summary.to_json());

  // Episode length in wall time.
  const auto ends = of_type(out, MessageType::phase_end, 0);
  REQUIRE(ends.size() == 2);
}

TEST_CASE("episode timing follows the tick") {
  auto cfg = quick_config();
  Session s(cfg, ConditionOrder::identifiable_first);
  std::vector<Outbound> out;
  fill(s, 0ms, out);
  Rng rng(2);
  // Ticks start one period after the episode opens: 2000 steps take 120 s.
  drive(s, 0ms, 119'999ms, out, rng);
  CHECK(of_type(out, MessageType::phase_end).empty());
  drive(s, 119'999ms, 120'000ms, out, rng);
  CHECK(of_type(out, MessageType::phase_end).size() == kGroupSize);
  CHECK(s.state() == Session::State::between);
}

TEST_CASE("rapid inputs collapse to one action per window") {
  auto cfg = quick_config(50);
  Session s(cfg, ConditionOrder::identifiable_first);
  std::vector<Outbound> out;
  fill(s, 0ms, out);
  CHECK(s.input(0, 1, 10ms) == InputDecision::accepted);
  CHECK(s.input(0, 2, 20ms) == InputDecision::replaced);
  CHECK(s.input(0, 3, 30ms) == InputDecision::replaced);
  s.advance(60ms, out);
  CHECK(s.input(0, 4, 70ms) == InputDecision::rejected);
  s.advance(120ms, out);
  CHECK_THROWS_AS(s.input(0, 9, 130ms), ConfigError);
  CHECK_THROWS_AS(s.input(0, -1, 130ms), ConfigError);
  // The first tick executed the latest input; the second had none.
  Rng rng(3);
  drive(s, 130ms, Millis(1'000'000), out, rng);
  const auto& r = s.records()[0];
  CHECK(r.steps[0].players[0].action == env::action_from_index(3));
  CHECK(r.steps[1].players[0].action == env::Action::noop);
}

TEST_CASE("disconnect pauses and a token resumes") {
  auto cfg = quick_config(100);
  Session s(cfg, ConditionOrder::identifiable_first);
  std::vector<Outbound> out;
  const auto tokens = fill(s, 0ms, out);
  Rng rng(4);
  Millis now = drive(s, 0ms, 1200ms, out, rng);
  s.disconnect(3, now, out);
  CHECK(s.state() == Session::State::paused);
  CHECK(of_type(out, MessageType::paused, 0).size() == 1);
  const auto frames_before = of_type(out, MessageType::frame, 0).size();
  s.advance(now + 30s, out);
  CHECK(s.state() == Session::State::paused);
  CHECK(of_type(out, MessageType::frame, 0).size() == frames_before);
  CHECK_FALSE(s.join(std::string("bogus"), now + 30s, out).has_value());
  CHECK_FALSE(s.join(std::nullopt, now + 30s, out).has_value());
  const auto back = s.join(tokens[3], now + 30s, out);
  REQUIRE(back == 3);
  CHECK(s.state() == Session::State::episode);
  CHECK(of_type(out, MessageType::resumed, 1).size() == 1);
  // The rejoining participant gets a fresh keyframe.
  const auto f3 = of_type(out, MessageType::frame, 3);
  CHECK(f3.back()["keyframe"] == true);
  drive(s, now + 30s, Millis(10'000'000), out, rng);
  CHECK(s.valid());
  CHECK(s.records().size() == 2);
  CHECK(s.records()[0].steps.size() == 100);
}

TEST_CASE("an expired reconnection window invalidates the session") {
  auto cfg = quick_config(100);
  Session s(cfg, ConditionOrder::identifiable_first);
  std::vector<Outbound> out;
  fill(s, 0ms, out);
  Rng rng(5);
  const Millis now = drive(s, 0ms, 600ms, out, rng);
  s.disconnect(0, now, out);
  s.advance(now + 59s, out);
  CHECK(s.state() == Session::State::paused);
  s.advance(now + 60s, out);
  CHECK(s.state() == Session::State::aborted);
  CHECK_FALSE(s.valid());
  const auto end = of_type(out, MessageType::session_end, 1);
  REQUIRE(end.size() == 1);
  CHECK(end[0]["valid"] == false);
  CHECK(s.records().empty());
}

TEST_CASE("leaving the lobby frees the slot") {
  Session s(quick_config(), ConditionOrder::identifiable_first);
  std::vector<Outbound> out;
  CHECK(s.join(std::nullopt, 0ms, out) == 0);
  CHECK(s.join(std::nullopt, 0ms, out) == 1);
  s.disconnect(0, 0ms, out);
  CHECK(s.connected_count() == 1);
  CHECK(s.join(std::nullopt, 0ms, out) == 0);
  CHECK(s.state() == Session::State::lobby);
}

TEST_CASE("shipped tutorials") {
  const auto ts = default_tutorials(env::EnvConfig::human_paper());
  REQUIRE(ts.size() == 6);
  CHECK(ts[0].goal == GoalKind::reach);
  CHECK(ts[1].goal == GoalKind::collect_apples);
  CHECK(ts[2].goal == GoalKind::clean_cells);
  CHECK(ts[4].goal == GoalKind::issue_ticket);
  CHECK(ts[5].goal == GoalKind::receive_ticket);
  CHECK(ts[5].partner == PartnerKind::ticketer);
  for (const auto& t : ts) CHECK(t.config.obs_window == 27);

  // Standing still never collects apples.
  TutorialRun idle(ts[1], 1);
  while (!idle.finished()) idle.step(env::Action::noop);
  CHECK_FALSE(idle.goal_met());
  CHECK(idle.state().t == ts[1].max_steps);

  // The ticketing partner seeks out a passive participant.
  TutorialRun recv(ts[5], 2);
  while (!recv.finished()) recv.step(env::Action::noop);
  CHECK(recv.goal_met());
  CHECK(recv.score() < 0);
}

TEST_CASE("tutorials precede scoring and are not recorded") {
  auto cfg = quick_config(30);
  cfg.tutorials = default_tutorials(cfg.env);
  for (auto& t : cfg.tutorials) {
    t.max_steps = 4;
    t.config.episode_length = 4;
  }
  Session s(cfg, ConditionOrder::identifiable_first);
  std::vector<Outbound> out;
  fill(s, 0ms, out);
  CHECK(s.state() == Session::State::tutorials);
  Rng rng(6);
  drive(s, 0ms, Millis(10'000'000), out, rng);
  CHECK(s.valid());
  const auto starts = of_type(out, MessageType::phase_start, 2);
  REQUIRE(starts.size() == 8);
  for (int i = 0; i < 6; ++i) CHECK(starts[static_cast<std::size_t>(i)]["phase"] == "tutorial");
  CHECK(starts[6]["phase"] == "episode");
  CHECK(s.records().size() == 2);
  CHECK(s.score_summary().episodes.size() == 2);
}

TEST_CASE("static file resolution") {
  const auto root = std::filesystem::temp_directory_path() / ("cleanup_static_" + std::to_string(::getpid()));
  std::filesystem::create_directories(root);
  std::ofstream(root / "index.html") << "<html></html>";
  CHECK(resolve_static(root, "/") == root / "index.html");
  CHECK(resolve_static(root, "/index.html?x=1") == root / "index.html");
  CHECK_FALSE(resolve_static(root, "/../etc/passwd").has_value());
  CHECK_FALSE(resolve_static(root, "/a/../../x").has_value());
  CHECK(mime_type("app.js").starts_with("text/javascript"));
  CHECK(mime_type("style.css").starts_with("text/css"));
  CHECK(mime_type("index.html").starts_with("text/html"));
}

TEST_CASE("websocket session end to end") {
  namespace beast = boost::beast;
  namespace ws = beast::websocket;
  using tcp = boost::asio::ip::tcp;

  const auto root = std::filesystem::temp_directory_path() / ("cleanup_ws_test_" + std::to_string(::getpid()));
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root / "static");
  std::ofstream(root / "static" / "index.html") << "<html>client</html>";

  ServerOptions opt;
  opt.address = "127.0.0.1";
  opt.port = 0;
  opt.static_dir = root / "static";
  opt.out_dir = root / "out";
  opt.base = quick_config(20);
  opt.base.tick = 5ms;
  opt.base.between_phases = 10ms;
  PlayServer server(opt);
  const auto port = server.port();
  std::thread runner([&] { server.run(); });

  {
    boost::asio::io_context ioc;
    tcp::socket sock(ioc);
    sock.connect({boost::asio::ip::make_address("127.0.0.1"), port});
    beast::http::request<beast::http::empty_body> req{beast::http::verb::get, "/", 11};
    req.set(beast::http::field::host, "localhost");
    beast::http::write(sock, req);
    beast::flat_buffer buf;
    beast::http::response<beast::http::string_body> res;
    beast::http::read(sock, buf, res);
    CHECK(res.result_int() == 200);
    CHECK(res.body() == "<html>client</html>");
  }

  std::vector<int> frames(kGroupSize, 0);
  std::vector<bool> valid(kGroupSize, false);
  std::vector<std::thread> clients;
  for (int i = 0; i < kGroupSize; ++i) {
    clients.emplace_back([&, i] {
      boost::asio::io_context ioc;
      ws::stream<tcp::socket> w(ioc);
      w.next_layer().connect({boost::asio::ip::make_address("127.0.0.1"), port});
      w.handshake("localhost", "/ws");
      w.binary(true);
      w.write(boost::asio::buffer(encode(make_message(MessageType::join))));
      for (;;) {
        beast::flat_buffer buf;
        w.read(buf);
        const auto m = decode(beast::buffers_to_string(buf.data()));
        const auto t = message_type(m);
        if (t == MessageType::frame) {
          ++frames[static_cast<std::size_t>(i)];
          w.write(boost::asio::buffer(encode(make_message(MessageType::input, {{"action", 2}}))));
        }
        if (t == MessageType::session_end) {
          valid[static_cast<std::size_t>(i)] = m["valid"].get<bool>();
          break;
        }
      }
      beast::error_code ec;
      w.close(ws::close_code::normal, ec);
    });
  }
  for (auto& c : clients) c.join();
  runner.join();
  for (int i = 0; i < kGroupSize; ++i) {
    CHECK(frames[static_cast<std::size_t>(i)] == 2 * 21);
    CHECK(valid[static_cast<std::size_t>(i)]);
  }
  const auto recs = io::read_record_dir(root / "out");
  CHECK(recs.size() == 2);
  CHECK(std::filesystem::exists(root / "out" / "session-0" / "summary.json"));
  std::filesystem::remove_all(root);
}
