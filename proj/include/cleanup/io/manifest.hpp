#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "cleanup/io/experiment_config.hpp"

namespace cleanup::io {

/// Build identifier baked in at compile time.
std::string build_version();

/// Digest of the canonical JSON form of a config.
std::uint64_t config_digest(const ExperimentConfig& c);

/// Every sub-seed a run draws from, derived from the one root seed.
std::map<std::string, std::uint64_t> seed_registry(std::uint64_t root);

struct RunManifest {
  std::string command;
  std::uint64_t config_digest = 0;
  std::uint64_t env_digest = 0;
  std::string build_version;
  std::uint64_t seed = 0;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> artifacts;  // role -> path relative to the run directory
  nlohmann::json config;

  static RunManifest for_run(const std::string& command, const ExperimentConfig& c);
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace cleanup::io
