#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "telesim/common/arm.hpp"
#include "telesim/patient/scenario.hpp"
#include "telesim/planner/planner.hpp"
#include "telesim/session/session.hpp"
#include "telesim/talker/talker.hpp"
#include "telesim/trace/trace.hpp"

namespace telesim::study {

struct EncounterOptions {
  int max_turns = 60;  // talker turns
  std::int64_t max_duration_ms = 20 * 60 * 1000;
  std::uint32_t barge_in_grace = 1;
  std::int64_t chunk_ms = 1500;  // simulated speaking time per chunk
  std::int64_t reply_ms = 4000;  // simulated patient reply time
  planner::PlannerOptions planner;
};

/// The planner attaches only to the coclinician arm.
inline bool arm_uses_planner(Arm arm) { return arm == Arm::Coclinician; }

struct TalkerTurn {
  std::string text;
  bool closed = false;
  bool interrupted = false;
};

/// One encounter's talker side: planner bookkeeping plus the responder.
/// Batch mode feeds it a simulated patient; the live service feeds it
/// whatever the browser posts. Both go through the same calls, so the two
/// modes write the same frames.
class EncounterHost {
 public:
  // `advance` runs before every talker chunk (batch mode moves its manual
  // clock there; live mode may pace the stream). `backend` may be null for
  // the human arm, where the clinician posts chunks directly.
  EncounterHost(std::shared_ptr<session::Session> session,
                std::shared_ptr<const patient::ScenarioScript> scenario, Arm arm,
                std::shared_ptr<talker::ResponderBackend> backend, EncounterOptions options,
                std::function<void(std::int64_t)> advance = {});

  /// Feeds the planner everything logged since its last look and posts its
  /// output at the next turn boundary.
  void sync_planner();

  /// Plans and emits the talker's next utterance (greeting on first call).
  TalkerTurn talker_turn(const talker::EmitHooks& extra = {});

  const planner::Planner* planner() const { return planner_.get(); }
  session::Session& session() { return *session_; }
  const std::shared_ptr<const patient::ScenarioScript>& scenario() const { return scenario_; }
  Arm arm() const { return arm_; }
  int turns() const { return turns_; }

  /// Logs a close control frame (unless the session timed out) and closes.
  trace::EncounterTrace finish(const std::string& reason = "done");

 private:
  std::shared_ptr<session::Session> session_;
  std::shared_ptr<const patient::ScenarioScript> scenario_;
  Arm arm_;
  std::shared_ptr<talker::ResponderBackend> backend_;
  EncounterOptions options_;
  std::function<void(std::int64_t)> advance_;
  std::unique_ptr<planner::Planner> planner_;
  int turns_ = 0;
};

/// Observed signs at time t as a FrameObservation payload.
Json observe_signs(const patient::ScenarioScript& scenario, std::int64_t t_ms);

struct SimulatedEncounter {
  trace::EncounterTrace trace;
  std::vector<Json> planner_snapshots;
  std::string end_reason;  // closed | max_turns | timeout
};

/// Runs a full encounter against the simulated patient on a manual clock.
/// Backend errors propagate (the runner decides about retries).
SimulatedEncounter simulate_encounter(std::shared_ptr<const patient::ScenarioScript> scenario,
                                      Arm arm, const std::string& actor,
                                      std::shared_ptr<talker::ResponderBackend> backend,
                                      const EncounterOptions& options,
                                      const std::string& session_id = "sim");

}  // namespace telesim::study
