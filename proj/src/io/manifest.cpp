#include "cleanup/io/manifest.hpp"

#include <fstream>

#include "cleanup/common/digest.hpp"
#include "cleanup/common/errors.hpp"
#include "cleanup/common/rng.hpp"

#ifndef CLEANUP_BUILD_VERSION
#define CLEANUP_BUILD_VERSION "dev"
#endif

namespace cleanup::io {

using nlohmann::json;

std::string build_version() { return CLEANUP_BUILD_VERSION; }

std::uint64_t config_digest(const ExperimentConfig& c) {
  Fnv1a h;
  h.add(std::string_view(to_json(c).dump()));
  return h.value();
}

std::map<std::string, std::uint64_t> seed_registry(std::uint64_t root) {
  std::map<std::string, std::uint64_t> s;
  for (const char* stream : {"env", "sampling", "init", "reputation", "partition", "bootstrap"}) {
    s[stream] = derive_seed(root, stream);
  }
  return s;
}

RunManifest RunManifest::for_run(const std::string& command, const ExperimentConfig& c) {
  RunManifest m;
  m.command = command;
  m.config_digest = io::config_digest(c);
  m.env_digest = c.env.digest();
  m.build_version = io::build_version();
  m.seed = c.seed;
  m.seeds = seed_registry(c.seed);
  m.config = io::to_json(c);
  return m;
}

json RunManifest::to_json() const {
  json seeds_j = json::object();
  for (const auto& [k, v] : seeds) seeds_j[k] = to_hex(v);
  return {{"command", command},
          {"config_digest", to_hex(config_digest)},
          {"env_digest", to_hex(env_digest)},
          {"build_version", build_version},
          {"seed", seed},
          {"seeds", seeds_j},
          {"artifacts", artifacts},
          {"config", config}};
}

RunManifest RunManifest::from_json(const json& j) {
  try {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config_digest = from_hex(j.at("config_digest").get<std::string>());
    m.env_digest = from_hex(j.at("env_digest").get<std::string>());
    m.build_version = j.at("build_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("seeds").items()) m.seeds[k] = from_hex(v.get<std::string>());
    m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    m.config = j.at("config");
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << m.to_json().dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
  return RunManifest::from_json(j);
}

}  // namespace cleanup::io
