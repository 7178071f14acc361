#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "telesim/common/json.hpp"
#include "telesim/stats/score_table.hpp"
#include "telesim/study/config.hpp"
#include "telesim/study/runner.hpp"

namespace telesim::study {

struct AnalyzeOptions {
  std::uint64_t seed = 0;
  int bootstrap_n = 10000;
  double ci_level = 0.95;
  Arm reference_arm = Arm::Coclinician;
  scoring::LikertMapping likert = scoring::LikertMapping::RatingOverFive;
  std::string config_hash;  // recorded in the manifest
  std::map<std::string, std::pair<std::string, std::string>> replication;  // scenario -> actors
};

AnalyzeOptions analyze_options(const StudyConfig& config, const StudyPlan* plan = nullptr);

struct ReportBundle {
  std::filesystem::path dir;
  stats::ScoreTable table;
  std::map<std::string, std::string> files;  // name -> content digest
  Json manifest;
};

/// Score table from the records' stored sheets (failed records are skipped).
/// Paths in records are relative to `records_dir`.
stats::ScoreTable build_score_table(const std::vector<RunRecord>& records, const ScenarioStore& store,
                                    const std::filesystem::path& records_dir,
                                    scoring::LikertMapping likert);

/// Fits, contrasts, bootstrap CIs, tau tables, gap maps and audit summaries
/// written under out_dir with a manifest. Output depends only on the inputs
/// and options. Throws Error(InsufficientData) when an arm has no usable
/// record.
ReportBundle analyze(const std::vector<RunRecord>& records, const ScenarioStore& store,
                     const std::filesystem::path& records_dir, const std::filesystem::path& out_dir,
                     const AnalyzeOptions& options);

}  // namespace telesim::study
