#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "telesim/common/json.hpp"
#include "telesim/study/config.hpp"
#include "telesim/study/plan.hpp"
#include "telesim/trace/trace.hpp"

namespace telesim::study {

enum class RunStatus { Ok, Repeated, Failed };
std::string_view to_string(RunStatus s);

struct RunRecord {
  Assignment entry;
  std::string encounter_id;
  std::filesystem::path trace_path;  // relative to the output directory
  std::filesystem::path sheet_path;
  RunStatus status = RunStatus::Ok;
  int repeat_count = 0;
  std::string error;
  std::string end_reason;
};

Json to_json(const RunRecord& r);
RunRecord record_from_json(const Json& j);
void write_records(const std::filesystem::path& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records(const std::filesystem::path& path);

/// Blocks until a human-arm encounter has been carried out live; nullopt
/// means it could not be fulfilled.
using LiveFulfiller =
    std::function<std::optional<trace::EncounterTrace>(const Assignment&, const std::string& encounter_id)>;

struct RunContext {
  const StudyConfig* config = nullptr;
  const ScenarioStore* store = nullptr;
  std::filesystem::path out_dir;
  LiveFulfiller live;
  std::function<void(const std::string&)> log;  // progress lines
};

/// Runs one assignment: a transport or backend failure is retried once with
/// the same backend and the record marked repeated; a second failure marks
/// it failed. Writes the trace and the autograded sheet under out_dir.
RunRecord run_encounter(const Assignment& entry, const RunContext& ctx);

/// Every assignment, actor blocks in order-index order; distinct actors may
/// run concurrently. Writes records.json. Throws Error(StudyAborted) once
/// failures exceed the configured fraction (records so far are still written).
std::vector<RunRecord> run_study(const StudyPlan& plan, const RunContext& ctx);

/// Autograded sheet plus stand-in universal ratings, as stored by the runner.
Json grade_trace(const trace::EncounterTrace& trace, const scoring::CaseRubric& rubric,
                 const std::string& encounter_id, scoring::LikertMapping mapping);

}  // namespace telesim::study
