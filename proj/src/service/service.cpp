#include "telesim/service/service.hpp"

#include <httplib.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "telesim/common/error.hpp"
#include "telesim/scoring/scoring.hpp"
#include "telesim/session/clock.hpp"
#include "telesim/trace/audit.hpp"

namespace telesim::service {

namespace fs = std::filesystem;
using session::FrameKind;

struct Service::Entry {
  std::string id;
  std::string encounter_id;
  study::Assignment assignment;
  std::shared_ptr<session::ManualClock> manual;
  std::shared_ptr<session::Session> session;
  std::unique_ptr<study::EncounterHost> host;
  bool automated = false;  // a backend answers; otherwise the clinician posts talker frames

  std::mutex turn_mu;  // talker turns, close, scores
  std::optional<trace::EncounterTrace> trace;
  std::string end_reason;
  Json autograde;
  std::vector<Json> history;  // manual score submissions, oldest first
};

namespace {

[[noreturn]] void fail(int status, std::string message) { throw ServiceError{status, std::move(message)}; }

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownScenario:
      return 404;
    case ErrorCode::ClosedSession:
    case ErrorCode::DoubleClose:
    case ErrorCode::DuplicateOpen:
    case ErrorCode::SessionTimeout:
    case ErrorCode::ChunkRejected:
    case ErrorCode::NoPendingTruncation:
      return 409;
    case ErrorCode::Backend:
    case ErrorCode::Transport:
      return 502;
    case ErrorCode::CorruptRecord:
    case ErrorCode::SchemaMismatch:
      return 500;
    default:
      return 400;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << text;
}

bool planner_frame(FrameKind k) { return k == FrameKind::DirectiveInjected || k == FrameKind::GoalStateChange; }

Json score_json(const scoring::EncounterScore& s) {
  Json domains = Json::object();
  for (auto d : scoring::kAllDomains) {
    auto name = std::string(to_string(d));
    domains[name] = {{"sum", s.domain_sum.at(d)}, {"max", s.domain_max.at(d)},
                     {"percent", s.domain_percent.at(d)}};
  }
  return {{"domains", domains}, {"total", s.total}, {"total_max", s.total_max},
          {"total_percent", s.total_percent}, {"universal_percent", s.universal_percent}};
}

}  // namespace

Service::Service(std::shared_ptr<const study::ScenarioStore> store, ServiceOptions options)
    : store_(std::move(store)), options_(std::move(options)) {}

Service::~Service() = default;

std::shared_ptr<Service::Entry> Service::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(404, "unknown session '" + id + "'");
  return it->second;
}

Json Service::create_session(const Json& body) {
  if (!body.is_object()) fail(400, "expected a JSON object");
  auto scenario_id = body.value("scenario", "");
  if (!store_->contains(scenario_id)) fail(404, "unknown scenario '" + scenario_id + "'");
  Arm arm = arm_from_string(body.value("arm", "coclinician"));

  auto e = std::make_shared<Entry>();
  e->id = session::make_session_id().value;
  e->assignment = {body.value("actor", ""), scenario_id, arm, body.value("order_index", 0)};
  e->encounter_id = body.value("encounter_id", "");
  if (!e->encounter_id.empty()) {
    std::lock_guard lock(mu_);
    if (auto w = waiting_.find(e->encounter_id); w != waiting_.end()) {
      if (w->second.scenario != scenario_id || w->second.arm != arm)
        fail(409, "encounter '" + e->encounter_id + "' is queued for a different scenario or arm");
      e->assignment = w->second;
    }
  }

  std::shared_ptr<const session::Clock> clock;
  if (options_.manual_clock) {
    e->manual = std::make_shared<session::ManualClock>(0);
    clock = e->manual;
  } else {
    clock = std::make_shared<session::SteadyClock>();
  }
  e->session = std::make_shared<session::Session>(session::SessionId{e->id}, clock);
  session::SessionConfig cfg;
  cfg.scenario_id = scenario_id;
  cfg.arm = arm;
  cfg.actor_id = e->assignment.actor;
  cfg.max_duration_ms = options_.encounter.max_duration_ms;
  cfg.barge_in_grace = options_.encounter.barge_in_grace;
  e->session->open(cfg);

  std::shared_ptr<talker::ResponderBackend> backend;
  if (auto b = options_.backends.find(arm); b != options_.backends.end()) backend = b->second.make();
  e->automated = backend != nullptr;
  std::function<void(std::int64_t)> advance;
  if (e->manual) {
    advance = [clock = e->manual](std::int64_t ms) { clock->advance(ms); };
  } else if (options_.pace_ms > 0) {
    advance = [ms = options_.pace_ms](std::int64_t) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
  }
  e->host = std::make_unique<study::EncounterHost>(e->session, store_->scenario(scenario_id), arm, backend,
                                                   options_.encounter, advance);
  {
    std::lock_guard lock(mu_);
    sessions_[e->id] = e;
  }
  if (e->automated) {
    std::lock_guard turn(e->turn_mu);
    run_talker_turn(*e);
  }
  return {{"id", e->id}, {"scenario", scenario_id}, {"stream", "/sessions/" + e->id + "/stream"}};
}

void Service::run_talker_turn(Entry& e) {
  try {
    auto turn = e.host->talker_turn();
    if (turn.closed) finish_locked(e, "closed");
  } catch (const Error& err) {
    if (err.code() != ErrorCode::SessionTimeout) throw;
    finish_locked(e, "timeout");
  }
}

void Service::finish_locked(Entry& e, const std::string& reason) {
  if (e.trace) return;
  if (reason != "timeout" && e.session->is_open()) e.host->sync_planner();
  e.trace = e.host->finish(reason);
  e.end_reason = reason;
  auto name = e.encounter_id.empty() ? e.id : e.encounter_id;
  fs::create_directories(options_.out_dir / "live");
  trace::write_trace_file(*e.trace, options_.out_dir / "live" / (name + std::string(trace::kTraceExtension)));
  auto sheet = scoring::autograde(*e.trace, store_->rubric(e.assignment.scenario), name);
  sheet.ref.arm = std::string(to_string(e.assignment.arm));
  sheet.ref.actor = e.assignment.actor;
  e.autograde = scoring::to_json(sheet);
  std::lock_guard lock(mu_);
  if (!e.encounter_id.empty() && waiting_.count(e.encounter_id)) {
    fulfilled_[e.encounter_id] = e.id;
    closed_cv_.notify_all();
  }
}

std::vector<Json> Service::stream(const std::string& id, std::uint64_t from, bool op, int wait_ms) {
  auto e = find(id);
  if (wait_ms > 0) e->session->wait_for_frames(from, std::chrono::milliseconds(wait_ms));
  std::vector<Json> out;
  for (const auto& f : e->session->frames_since(from)) {
    if (!op && planner_frame(f.kind)) continue;
    auto j = session::to_json(f);
    if (!op && f.kind == FrameKind::TalkerUtteranceChunk) {
      j["payload"].erase("directive");
      j["payload"].erase("step");
    }
    out.push_back(std::move(j));
  }
  return out;
}

Json Service::submit(const std::string& id, const Json& body) {
  auto e = find(id);
  std::vector<Json> frames;
  if (body.is_array()) {
    frames.assign(body.begin(), body.end());
  } else if (body.is_object()) {
    frames.push_back(body);
  } else {
    fail(400, "expected a frame object or an array of frames");
  }

  Json seqs = Json::array();
  for (const auto& f : frames) {
    if (!f.is_object() || !f.contains("kind")) fail(400, "frame needs a kind");
    auto kind = session::parse_frame_kind(f.at("kind").get<std::string>());
    if (!kind) fail(400, "unknown frame kind '" + f.at("kind").get<std::string>() + "'");
    if (planner_frame(*kind)) fail(400, "planner frames are server-generated");
    bool clinician_kind = *kind == FrameKind::TalkerUtteranceChunk || *kind == FrameKind::FrameCaptureRequest ||
                          *kind == FrameKind::FrameObservation;
    if (clinician_kind && e->automated) fail(400, "this session's talker is automated");
    auto payload = f.value("payload", Json::object());
    auto advance = f.value("advance_ms", std::int64_t{0});
    if (advance < 0) fail(400, "advance_ms must be non-negative");
    if (advance > 0 && !e->manual) fail(400, "advance_ms needs the manual clock");

    if (*kind == FrameKind::SessionControl) {
      if (payload.value("action", "") != session::kControlClose) fail(400, "only close may be posted");
      close(id, payload.value("reason", "done"));
      continue;
    }
    if (*kind == FrameKind::BargeIn) {
      // Not serialized behind the talker: it has to land while chunks stream.
      if (e->manual) e->manual->advance(advance);
      seqs.push_back(e->session->submit(*kind, payload));
      continue;
    }
    std::lock_guard turn(e->turn_mu);
    if (e->trace) fail(409, "session is closed");
    if (e->manual) e->manual->advance(advance);
    std::uint64_t seq;
    try {
      seq = e->session->submit(*kind, payload);
    } catch (const Error& err) {
      if (err.code() == ErrorCode::SessionTimeout) finish_locked(*e, "timeout");
      throw;
    }
    seqs.push_back(seq);
    auto logged = e->session->frames_since(seq);
    if (e->automated && !logged.empty() && session::is_patient_turn_end(logged.front())) {
      if (e->host->turns() >= options_.encounter.max_turns)
        finish_locked(*e, "max_turns");
      else
        run_talker_turn(*e);
    }
  }
  return {{"seqs", seqs}, {"closed", e->session->is_closed()}};
}

Json Service::close(const std::string& id, const std::string& reason) {
  auto e = find(id);
  std::lock_guard turn(e->turn_mu);
  if (e->trace) fail(409, "session already closed");
  finish_locked(*e, reason);
  return {{"id", id}, {"end_reason", e->end_reason}, {"frames", e->trace->size()}};
}

Json Service::planner(const std::string& id) {
  auto e = find(id);
  std::lock_guard turn(e->turn_mu);
  const auto* p = e->host->planner();
  Json out{{"attached", p != nullptr}, {"snapshots", Json::array()}, {"directives", Json::array()}};
  if (p) {
    out["snapshots"] = p->snapshots();
    for (const auto& d : p->directives()) out["directives"].push_back(planner::to_json(d));
  }
  return out;
}

Json Service::submit_scores(const std::string& id, const Json& body) {
  auto e = find(id);
  std::lock_guard turn(e->turn_mu);
  if (!e->trace) fail(409, "scores are accepted only after the session closes");
  if (!body.is_object()) fail(400, "expected a score sheet object");
  const auto& rubric = store_->rubric(e->assignment.scenario);
  auto name = e->encounter_id.empty() ? e->id : e->encounter_id;

  Json sheet_in = body;
  sheet_in["encounter_id"] = name;
  sheet_in["scenario"] = e->assignment.scenario;
  auto sheet = scoring::sheet_from_json(sheet_in, rubric);
  std::string missing;
  for (const auto& c : scoring::universal_criteria())
    if (!sheet.universal.count(std::string(c.id))) missing += (missing.empty() ? "" : ", ") + std::string(c.id);
  if (!missing.empty()) fail(400, "missing universal ratings: " + missing);
  sheet.ref.arm = std::string(to_string(e->assignment.arm));
  sheet.ref.actor = e->assignment.actor;
  sheet.rater = "manual:" + body.value("rater", std::string("anonymous"));
  scoring::aggregate(sheet, rubric, options_.likert);  // range checks

  auto score_id = "score-" + std::to_string(e->history.size() + 1);
  Json replaces = nullptr;
  if (!e->history.empty()) {
    auto& prior = e->history.back();
    replaces = prior["score_id"];
    prior["superseded_by"] = score_id;
  }
  Json record{{"score_id", score_id}, {"sheet", scoring::to_json(sheet)}, {"replaces", replaces}};
  if (!replaces.is_null()) record["note"] = "replaces " + replaces.get<std::string>() + " (resubmission)";
  e->history.push_back(record);

  write_text(options_.out_dir / "scores" / (name + ".json"), scoring::to_json(sheet).dump(2) + "\n");
  write_text(options_.out_dir / "scores" / (name + ".history.json"), Json(e->history).dump(2) + "\n");
  return {{"score_id", score_id}, {"replaces", replaces}};
}

Json Service::scores(const std::string& id) {
  auto e = find(id);
  std::lock_guard turn(e->turn_mu);
  return {{"current", e->history.empty() ? Json(nullptr) : e->history.back()["sheet"]},
          {"history", e->history}};
}

std::string Service::trace_text(const std::string& id) {
  auto e = find(id);
  std::lock_guard turn(e->turn_mu);
  auto t = e->trace ? *e->trace
                    : trace::EncounterTrace(trace::TraceMetadata{e->assignment.scenario, e->assignment.arm,
                                                                 e->assignment.actor, 0, e->id},
                                            e->session->frames_since(0));
  return trace::export_trace(t);
}

Json Service::report(const std::string& id) {
  auto e = find(id);
  std::lock_guard turn(e->turn_mu);
  if (!e->trace) fail(409, "report is available after the session closes");
  const auto& rubric = store_->rubric(e->assignment.scenario);
  auto autograde = scoring::sheet_from_json(e->autograde, rubric);
  Json out{{"session", e->id},
           {"encounter_id", e->encounter_id},
           {"scenario", e->assignment.scenario},
           {"arm", to_string(e->assignment.arm)},
           {"actor", e->assignment.actor},
           {"end_reason", e->end_reason},
           {"frames", e->trace->size()},
           {"autograde", {{"sheet", e->autograde}, {"score", score_json(scoring::aggregate(autograde, rubric, options_.likert))}}},
           {"rater", nullptr},
           {"score_history", e->history},
           {"audit", trace::to_json(trace::audit(*e->trace))}};
  if (!e->history.empty()) {
    auto sheet = scoring::sheet_from_json(e->history.back()["sheet"], rubric);
    out["rater"] = {{"score_id", e->history.back()["score_id"]},
                    {"sheet", e->history.back()["sheet"]},
                    {"score", score_json(scoring::aggregate(sheet, rubric, options_.likert))}};
  }
  return out;
}

Json Service::queue() {
  std::lock_guard lock(mu_);
  Json out = Json::array();
  for (const auto& [enc, a] : waiting_)
    if (!fulfilled_.count(enc))
      out.push_back({{"encounter_id", enc}, {"scenario", a.scenario}, {"arm", to_string(a.arm)}, {"actor", a.actor}});
  return out;
}

study::LiveFulfiller Service::live_fulfiller(std::chrono::milliseconds timeout) {
  return [this, timeout](const study::Assignment& a, const std::string& enc) -> std::optional<trace::EncounterTrace> {
    std::unique_lock lock(mu_);
    waiting_[enc] = a;
    bool done = closed_cv_.wait_for(lock, timeout, [&] { return fulfilled_.count(enc) > 0; });
    waiting_.erase(enc);
    if (!done) return std::nullopt;
    auto e = sessions_.at(fulfilled_.at(enc));
    lock.unlock();
    std::lock_guard turn(e->turn_mu);
    return e->trace;
  };
}

void Service::mount(httplib::Server& server) {
  auto wrap = [](auto fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const ServiceError& e) {
        res.status = e.status;
        res.set_content(Json{{"error", e.message}}.dump(), "application/json");
      } catch (const Error& e) {
        res.status = status_for(e.code());
        res.set_content(Json{{"error", e.what()}, {"code", to_string(e.code())}}.dump(), "application/json");
      } catch (const Json::exception& e) {
        res.status = 400;
        res.set_content(Json{{"error", e.what()}}.dump(), "application/json");
      }
    };
  };
  auto body_json = [](const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    try {
      return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
      fail(400, std::string("malformed JSON: ") + e.what());
    }
  };
  auto reply = [](httplib::Response& res, const Json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  };
  auto int_param = [](const httplib::Request& req, const char* name, long long fallback) -> long long {
    if (!req.has_param(name)) return fallback;
    try {
      return std::stoll(req.get_param_value(name));
    } catch (const std::exception&) {
      fail(400, std::string("bad ") + name + " parameter");
    }
  };

  server.Post("/sessions", wrap([=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, create_session(body_json(req)), 201);
  }));
  server.Get("/sessions", wrap([=, this](const httplib::Request&, httplib::Response& res) {
    Json ids = Json::array();
    {
      std::lock_guard lock(mu_);
      for (const auto& [id, e] : sessions_) ids.push_back(id);
    }
    reply(res, ids);
  }));
  server.Get(R"(/sessions/([^/]+)/stream)", wrap([=, this](const httplib::Request& req, httplib::Response& res) {
    auto from = int_param(req, "from", 0);
    if (from < 0) fail(400, "bad from parameter");
    bool op = req.has_param("operator") && req.get_param_value("operator") == "1";
    auto frames = stream(req.matches[1], static_cast<std::uint64_t>(from), op,
                         static_cast<int>(int_param(req, "wait_ms", 0)));
    std::string out;
    for (const auto& f : frames) out += f.dump() + "\n";
    res.set_content(out, "application/x-ndjson");
  }));
  server.Post(R"(/sessions/([^/]+)/stream)", wrap([=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, submit(req.matches[1], body_json(req)));
  }));
  server.Post(R"(/sessions/([^/]+)/close)", wrap([=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, close(req.matches[1], body_json(req).value("reason", "done")));
  }));
  server.Get(R"(/sessions/([^/]+)/planner)", wrap([=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, planner(req.matches[1]));
  }));
  server.Post(R"(/sessions/([^/]+)/scores)", wrap([=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, submit_scores(req.matches[1], body_json(req)), 201);
  }));
  server.Get(R"(/sessions/([^/]+)/scores)", wrap([=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, scores(req.matches[1]));
  }));
  server.Get(R"(/sessions/([^/]+)/trace)", wrap([=, this](const httplib::Request& req, httplib::Response& res) {
    res.set_content(trace_text(req.matches[1]), "application/x-ndjson");
  }));
  server.Get(R"(/reports/([^/]+))", wrap([=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, report(req.matches[1]));
  }));
  server.Get("/queue", wrap([=, this](const httplib::Request&, httplib::Response& res) { reply(res, queue()); }));
}

}  // namespace telesim::service
