#include "cleanup/io/record_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cleanup/common/digest.hpp"
#include "cleanup/common/errors.hpp"
#include "cleanup/io/experiment_config.hpp"

namespace cleanup::io {

using nlohmann::json;

void write_record(std::ostream& out, const env::EpisodeRecord& r) {
  json positions = json::array();
  for (const auto& p : r.initial_positions) positions.push_back({p.x, p.y});
  json header = {{"type", "header"},
                 {"schema", {{"major", env::EpisodeRecord::kSchemaMajor}, {"minor", env::EpisodeRecord::kSchemaMinor}}},
                 {"preset", r.preset},
                 {"config", to_json(r.config)},
                 {"config_digest", to_hex(r.config_digest)},
                 {"map", r.map_text},
                 {"seed", r.seed},
                 {"condition", std::string(to_string(r.condition))},
                 {"group_id", r.group_id},
                 {"episode_index", r.episode_index},
                 {"task_index", r.task_index},
                 {"session_id", r.session_id},
                 {"player_ids", r.player_ids},
                 {"initial_positions", positions},
                 {"initial_digest", to_hex(r.initial_digest)}};
  out << header.dump() << '\n';
  for (std::size_t t = 0; t < r.steps.size(); ++t) {
    const auto& s = r.steps[t];
    json players = json::array();
    for (const auto& p : s.players) {
      players.push_back({p.pos.x, p.pos.y, static_cast<int>(p.facing), static_cast<int>(p.action), p.reward,
                         static_cast<int>(p.contributed), static_cast<int>(p.apples)});
    }
    json line = {{"type", "step"},
                 {"t", t},
                 {"players", players},
                 {"polluted_fraction", s.polluted_fraction},
                 {"digest", to_hex(s.digest)}};
    if (!s.intrinsic.empty()) line["intrinsic"] = s.intrinsic;
    out << line.dump() << '\n';
  }
  out << json{{"type", "footer"}, {"steps", r.steps.size()}, {"final_digest", to_hex(r.final_digest)}}.dump() << '\n';
}

void write_record(const std::filesystem::path& path, const env::EpisodeRecord& record) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + tmp);
    write_record(out, record);
    if (!out) throw ConfigError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

namespace {

env::EpisodeRecord parse_header(const json& h) {
  const auto major = h.at("schema").at("major").get<int>();
  if (major > env::EpisodeRecord::kSchemaMajor) {
    throw ConfigError("record schema major " + std::to_string(major) + " is newer than supported " +
                      std::to_string(env::EpisodeRecord::kSchemaMajor));
  }
  env::EpisodeRecord r;
  r.preset = h.at("preset").get<std::string>();
  r.config = env_config_from_json(h.at("config"));
  r.config_digest = from_hex(h.at("config_digest").get<std::string>());
  r.map_text = h.at("map").get<std::string>();
  r.seed = h.at("seed").get<std::uint64_t>();
  r.condition = parse_condition(h.at("condition").get<std::string>());
  r.group_id = h.at("group_id").get<int>();
  r.episode_index = h.at("episode_index").get<int>();
  r.task_index = h.at("task_index").get<int>();
  r.session_id = h.at("session_id").get<std::string>();
  r.player_ids = h.at("player_ids").get<std::vector<std::string>>();
  for (const auto& p : h.at("initial_positions")) r.initial_positions.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
  r.initial_digest = from_hex(h.at("initial_digest").get<std::string>());
  if (r.initial_positions.size() != r.player_ids.size()) throw CorruptionError("record header: player count mismatch");
  return r;
}

env::StepRecord parse_step(const json& j, std::size_t players, long t) {
  env::StepRecord s;
  const auto& ps = j.at("players");
  if (ps.size() != players) throw CorruptionError("step " + std::to_string(t) + ": wrong player count", t);
  for (const auto& p : ps) {
    env::PlayerStep x;
    x.pos = {p.at(0).get<int>(), p.at(1).get<int>()};
    const int facing = p.at(2).get<int>();
    const int action = p.at(3).get<int>();
    if (facing < 0 || facing > 3) throw CorruptionError("step " + std::to_string(t) + ": bad facing", t);
    x.facing = static_cast<env::Orientation>(facing);
    x.action = env::action_from_index(action);
    x.reward = p.at(4).get<double>();
    x.contributed = static_cast<std::uint8_t>(p.at(5).get<int>());
    x.apples = static_cast<std::uint8_t>(p.at(6).get<int>());
    s.players.push_back(x);
  }
  s.polluted_fraction = j.at("polluted_fraction").get<double>();
  s.digest = from_hex(j.at("digest").get<std::string>());
  if (j.contains("intrinsic")) s.intrinsic = j.at("intrinsic").get<std::vector<double>>();
  return s;
}

}  // namespace

std::vector<env::EpisodeRecord> read_records(std::istream& in) {
  std::vector<env::EpisodeRecord> out;
  std::optional<env::EpisodeRecord> cur;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const long step = cur ? static_cast<long>(cur->steps.size()) : -1;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw CorruptionError("line " + std::to_string(line_no) + ": malformed or truncated JSON" +
                                (cur ? " at step " + std::to_string(step) : std::string()),
                            step);
    }
    try {
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        if (cur) throw CorruptionError("episode truncated at step " + std::to_string(step) + " (no footer)", step);
        cur = parse_header(j);
      } else if (type == "step") {
        if (!cur) throw CorruptionError("line " + std::to_string(line_no) + ": step without header");
        if (j.at("t").get<long>() != step) {
          throw CorruptionError("line " + std::to_string(line_no) + ": expected step " + std::to_string(step), step);
        }
        cur->steps.push_back(parse_step(j, cur->player_ids.size(), step));
      } else if (type == "footer") {
        if (!cur) throw CorruptionError("line " + std::to_string(line_no) + ": footer without header");
        if (j.at("steps").get<long>() != step) {
          throw CorruptionError("episode truncated at step " + std::to_string(step), step);
        }
        cur->final_digest = from_hex(j.at("final_digest").get<std::string>());
        out.push_back(std::move(*cur));
        cur.reset();
      } else {
        throw CorruptionError("line " + std::to_string(line_no) + ": unknown line type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw CorruptionError("line " + std::to_string(line_no) + ": " + e.what(), step);
    }
  }
  if (cur) {
    const long step = static_cast<long>(cur->steps.size());
    throw CorruptionError("episode truncated at step " + std::to_string(step) + " (no footer)", step);
  }
  return out;
}

std::vector<env::EpisodeRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open record file " + path.string());
  try {
    return read_records(in);
  } catch (const CorruptionError& e) {
    throw CorruptionError(path.string() + ": " + e.what(), e.step());
  }
}

namespace {

bool is_record_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    return !j.is_discarded() && j.is_object() && j.value("type", "") == "header";
  }
  return false;
}

}  // namespace

std::vector<env::EpisodeRecord> read_record_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl" && is_record_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<env::EpisodeRecord> out;
  for (const auto& f : files) {
    auto rs = read_records(f);
    for (auto& r : rs) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cleanup::io
