#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cleanup/env/episode_record.hpp"
#include "cleanup/io/experiment_config.hpp"

namespace cleanup::io {

struct EpisodeMetrics {
  Condition condition = Condition::identifiable;
  int group_id = 0;
  int episode_index = 0;
  int task_index = 0;
  std::string session_id;
  double collective_return = 0.0;
  double group_contribution = 0.0;  // summed contribution steps
  double mean_intrinsic = 0.0;      // per member
  std::optional<double> territoriality;
  bool territoriality_degenerate = false;
  std::optional<double> turn_taking;
  double consistency = 1.0;
  bool consistency_degenerate = false;
  int turns = 0;
};

EpisodeMetrics episode_metrics(const env::EpisodeRecord& record, const AnalysisOptions& options);

struct ReportOptions {
  AnalysisOptions analysis;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct MetricReport {
  std::vector<EpisodeMetrics> episodes;
  std::vector<nlohmann::json> lines;  // every record of report.jsonl, in order
  std::string summary;                // plain-text table
  std::vector<std::string> notices;
  nlohmann::json schelling_csv_rows;  // rows for schelling.csv
};

/// Throws ConfigError for an empty input or records from different
/// environment configurations.
MetricReport build_report(std::span<const env::EpisodeRecord> records, const ReportOptions& options);

/// Writes report.jsonl, summary.txt, episodes.csv, schelling.csv,
/// territory.csv and timeline.csv into `dir`.
void write_report(const std::filesystem::path& dir, const MetricReport& report,
                  std::span<const env::EpisodeRecord> records);

}  // namespace cleanup::io
