#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "telesim/common/json.hpp"
#include "telesim/study/config.hpp"
#include "telesim/study/encounter.hpp"
#include "telesim/study/runner.hpp"

namespace httplib {
class Server;
}

namespace telesim::service {

struct ServiceOptions {
  std::filesystem::path out_dir;  // traces/, sheets/, scores/
  study::EncounterOptions encounter;
  std::map<Arm, study::BackendSpec> backends;  // missing or live: clinician posts talker frames
  scoring::LikertMapping likert = scoring::LikertMapping::RatingOverFive;
  // Manual clock: time moves only by talker chunks and client advance_ms,
  // which makes a replayed encounter reproduce batch timestamps.
  bool manual_clock = false;
  int pace_ms = 0;  // real delay before each talker chunk in steady-clock mode
};

/// HTTP-facing failure: status plus message.
struct ServiceError {
  int status;
  std::string message;
};

/// The live-session service. Handlers are plain methods over JSON so they
/// can be exercised without a socket; mount() wires them to HTTP routes:
///
///   POST /sessions                     {scenario, arm, actor?, encounter_id?}
///   GET  /sessions/{id}/stream         ?from=N&wait_ms=M&operator=1  -> NDJSON frames
///   POST /sessions/{id}/stream         frame or [frames], each {kind, payload, advance_ms?}
///   POST /sessions/{id}/close          {reason?}
///   GET  /sessions/{id}/planner        per-turn snapshots and live directives
///   POST /sessions/{id}/scores         score sheet (session must be closed)
///   GET  /sessions/{id}/scores
///   GET  /sessions/{id}/trace          NDJSON trace file
///   GET  /reports/{id}
///   GET  /queue                        human-arm assignments waiting for a live session
///
/// Without operator=1 the stream omits planner frames and arm metadata.
class Service {
 public:
  Service(std::shared_ptr<const study::ScenarioStore> store, ServiceOptions options);
  ~Service();

  Json create_session(const Json& body);
  std::vector<Json> stream(const std::string& id, std::uint64_t from, bool op, int wait_ms = 0);
  Json submit(const std::string& id, const Json& body);
  Json close(const std::string& id, const std::string& reason = "done");
  Json planner(const std::string& id);
  Json submit_scores(const std::string& id, const Json& body);
  Json scores(const std::string& id);
  std::string trace_text(const std::string& id);
  Json report(const std::string& id);
  Json queue();

  /// Batch-runner hook for human-arm assignments: waits until a session
  /// created with the assignment's encounter id closes.
  study::LiveFulfiller live_fulfiller(std::chrono::milliseconds timeout);

  void mount(httplib::Server& server);

 private:
  struct Entry;
  std::shared_ptr<Entry> find(const std::string& id) const;
  void finish_locked(Entry& e, const std::string& reason);
  void run_talker_turn(Entry& e);

  std::shared_ptr<const study::ScenarioStore> store_;
  ServiceOptions options_;
  mutable std::mutex mu_;
  std::condition_variable closed_cv_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::map<std::string, study::Assignment> waiting_;  // encounter id -> assignment
  std::map<std::string, std::string> fulfilled_;       // encounter id -> session id
};

}  // namespace telesim::service
