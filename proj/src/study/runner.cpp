#include "telesim/study/runner.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "telesim/common/error.hpp"
#include "telesim/scoring/scoring.hpp"

namespace telesim::study {

namespace fs = std::filesystem;

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::Repeated: return "repeated";
    case RunStatus::Failed: return "failed";
  }
  return "failed";
}

namespace {

RunStatus parse_status(const std::string& s) {
  if (s == "ok") return RunStatus::Ok;
  if (s == "repeated") return RunStatus::Repeated;
  if (s == "failed") return RunStatus::Failed;
  throw Error(ErrorCode::Parse, "unknown run status '" + s + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << text;
}

}  // namespace

Json to_json(const RunRecord& r) {
  return Json{{"encounter_id", r.encounter_id},
              {"actor", r.entry.actor},
              {"scenario", r.entry.scenario},
              {"arm", to_string(r.entry.arm)},
              {"order_index", r.entry.order_index},
              {"trace", r.trace_path.generic_string()},
              {"sheet", r.sheet_path.generic_string()},
              {"status", to_string(r.status)},
              {"repeat_count", r.repeat_count},
              {"error", r.error},
              {"end_reason", r.end_reason}};
}

RunRecord record_from_json(const Json& j) {
  try {
    RunRecord r;
    r.entry = {j.at("actor").get<std::string>(), j.at("scenario").get<std::string>(),
               arm_from_string(j.at("arm").get<std::string>()), j.at("order_index").get<int>()};
    r.encounter_id = j.at("encounter_id").get<std::string>();
    r.trace_path = j.value("trace", "");
    r.sheet_path = j.value("sheet", "");
    r.status = parse_status(j.at("status").get<std::string>());
    r.repeat_count = j.value("repeat_count", 0);
    r.error = j.value("error", "");
    r.end_reason = j.value("end_reason", "");
    if (r.status == RunStatus::Repeated && r.repeat_count < 1)
      throw Error(ErrorCode::Validation, "repeated record without a repeat count");
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("run record: ") + e.what());
  }
}

void write_records(const fs::path& path, const std::vector<RunRecord>& records) {
  Json list = Json::array();
  for (const auto& r : records) list.push_back(to_json(r));
  write_text(path, list.dump(2) + "\n");
}

std::vector<RunRecord> read_records(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  std::vector<RunRecord> out;
  for (const auto& r : j) out.push_back(record_from_json(r));
  return out;
}

Json grade_trace(const trace::EncounterTrace& trace, const scoring::CaseRubric& rubric,
                 const std::string& encounter_id, scoring::LikertMapping mapping) {
  auto sheet = scoring::autograde(trace, rubric, encounter_id);
  // Batch runs have no human rater; the universal criteria get stand-ins
  // and the sheet says so.
  sheet.universal = scoring::proxy_universal_ratings(scoring::aggregate(sheet, rubric, mapping));
  auto j = scoring::to_json(sheet);
  j["universal_source"] = "proxy";
  return j;
}

RunRecord run_encounter(const Assignment& entry, const RunContext& ctx) {
  const auto& config = *ctx.config;
  RunRecord rec;
  rec.entry = entry;
  rec.encounter_id = encounter_id(entry);

  auto scenario = ctx.store->scenario(entry.scenario);
  auto spec = config.backends.find(entry.arm);
  if (spec == config.backends.end()) {
    rec.status = RunStatus::Failed;
    rec.error = "no backend configured for arm";
    return rec;
  }

  std::optional<trace::EncounterTrace> trace;
  if (spec->second.type == "live") {
    if (!ctx.live) {
      rec.status = RunStatus::Failed;
      rec.error = "human arm needs a live session and none is attached";
      return rec;
    }
    trace = ctx.live(entry, rec.encounter_id);
    if (!trace) {
      rec.status = RunStatus::Failed;
      rec.error = "live session was not completed";
      return rec;
    }
    rec.end_reason = "live";
  } else {
    std::shared_ptr<talker::ResponderBackend> backend;
    try {
      backend = spec->second.make();
    } catch (const Error& e) {
      rec.status = RunStatus::Failed;
      rec.error = e.what();
      return rec;
    }
    for (int attempt = 0; attempt < 2 && !trace; ++attempt) {
      try {
        auto sim = simulate_encounter(scenario, entry.arm, entry.actor, backend, config.encounter,
                                      rec.encounter_id);
        rec.end_reason = sim.end_reason;
        trace = std::move(sim.trace);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Transport && e.code() != ErrorCode::Backend) throw;
        rec.error = e.what();
        if (attempt == 0) rec.repeat_count = 1;
      }
    }
    if (!trace) {
      rec.status = RunStatus::Failed;
      return rec;
    }
    rec.status = rec.repeat_count > 0 ? RunStatus::Repeated : RunStatus::Ok;
  }

  rec.trace_path = fs::path("traces") / (rec.encounter_id + std::string(trace::kTraceExtension));
  rec.sheet_path = fs::path("sheets") / (rec.encounter_id + ".json");
  fs::create_directories((ctx.out_dir / rec.trace_path).parent_path());
  trace::write_trace_file(*trace, ctx.out_dir / rec.trace_path);
  auto sheet = grade_trace(*trace, ctx.store->rubric(entry.scenario), rec.encounter_id, config.analysis.likert);
  write_text(ctx.out_dir / rec.sheet_path, sheet.dump(2) + "\n");
  return rec;
}

std::vector<RunRecord> run_study(const StudyPlan& plan, const RunContext& ctx) {
  std::vector<std::string> actors;
  {
    std::set<std::string> seen;
    for (const auto& a : plan.assignments)
      if (seen.insert(a.actor).second) actors.push_back(a.actor);
  }
  for (const auto& a : plan.assignments) ctx.store->scenario(a.scenario);  // fail fast

  std::mutex mu;
  std::map<std::string, RunRecord> done;
  std::atomic<int> failures{0};
  std::atomic<bool> aborted{false};
  const int total = static_cast<int>(plan.assignments.size());
  const double limit = ctx.config->abort_fraction * total;
  std::exception_ptr error;

  auto run_actor = [&](const std::string& actor) {
    try {
      for (const auto* a : plan.for_actor(actor)) {
        if (aborted) return;
        auto rec = run_encounter(*a, ctx);
        if (rec.status == RunStatus::Failed && ++failures > limit) aborted = true;
        std::lock_guard lock(mu);
        if (ctx.log)
          ctx.log(rec.encounter_id + " " + std::string(to_string(rec.status)) +
                  (rec.error.empty() ? "" : " (" + rec.error + ")"));
        done.emplace(rec.encounter_id, std::move(rec));
      }
    } catch (...) {
      std::lock_guard lock(mu);
      if (!error) error = std::current_exception();
      aborted = true;
    }
  };

  if (ctx.config->parallel && actors.size() > 1) {
    std::vector<std::thread> pool;
    for (const auto& actor : actors) pool.emplace_back(run_actor, actor);
    for (auto& t : pool) t.join();
  } else {
    for (const auto& actor : actors) run_actor(actor);
  }

  // Plan order, whatever the scheduling was.
  std::vector<RunRecord> records;
  for (const auto& a : plan.assignments)
    if (auto it = done.find(encounter_id(a)); it != done.end()) records.push_back(it->second);
  write_records(ctx.out_dir / "records.json", records);
  if (error) std::rethrow_exception(error);
  if (aborted)
    throw Error(ErrorCode::StudyAborted, "study aborted: " + std::to_string(failures.load()) + " of " +
                                             std::to_string(total) + " encounters failed");
  return records;
}

}  // namespace telesim::study
