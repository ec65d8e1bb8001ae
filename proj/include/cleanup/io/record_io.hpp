#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "cleanup/env/episode_record.hpp"

namespace cleanup::io {

/// Episode logs are line-delimited JSON: one header line, one line per
/// step, one footer line. A file may hold several episodes back to back.
///
/// header: {"type":"header","schema":{"major":1,"minor":0},"preset","config","config_digest","map",
///          "seed","condition","group_id","episode_index","task_index","session_id","player_ids",
///          "initial_positions":[[x,y],...],"initial_digest"}
/// step:   {"type":"step","t","players":[[x,y,facing,action,reward,contributed,apples],...],
///          "polluted_fraction","digest","intrinsic":[...]?}
/// footer: {"type":"footer","steps","final_digest"}
/// Digests are 16-digit hex strings.
void write_record(std::ostream& out, const env::EpisodeRecord& record);
void write_record(const std::filesystem::path& path, const env::EpisodeRecord& record);

/// Throws CorruptionError on truncation (naming the step reached) or
/// malformed lines, and ConfigError for a newer schema major.
std::vector<env::EpisodeRecord> read_records(std::istream& in);
std::vector<env::EpisodeRecord> read_records(const std::filesystem::path& path);

/// Every *.jsonl file under `dir` that starts with a record header, sorted by path.
std::vector<env::EpisodeRecord> read_record_dir(const std::filesystem::path& dir);

}  // namespace cleanup::io
