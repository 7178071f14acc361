#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "telesim/common/json.hpp"
#include "telesim/patient/scenario.hpp"

namespace telesim::patient {

/// Session-local simulated patient. Single owner; not thread safe.
struct PatientState {
  explicit PatientState(std::shared_ptr<const ScenarioScript> script);

  std::shared_ptr<const ScenarioScript> scenario;
  std::set<std::string> disclosed;             // fact and red-flag ids
  std::set<std::string> elicited;              // maneuver findings produced
  std::map<std::string, int> probe_turns;      // on_active_probe: turns probed
  int replies = 0;
};

struct Disclosed {
  std::string finding;
  std::string statement;
  bool red_flag = false;
  bool operator==(const Disclosed&) const = default;
};

struct ProbeResult {
  std::vector<Disclosed> disclosed;
  std::vector<std::string> hedged;  // matched on_active_probe facts not yet released
  std::vector<std::string> withheld;  // omitted because the question was compound
};

/// Releases the facts the question earns under each fact's disclosure policy.
/// Idempotent: re-asking returns the same finding without changing state.
ProbeResult match_probe(std::string_view question, PatientState& state);

struct ManeuverPerformed {
  std::string maneuver;
  double held_s = 0;
  std::optional<ScriptedFinding> finding;
};
/// The patient did not understand; deliberately names nothing.
struct ClarificationRequest {
  std::string maneuver;
};
struct IncorrectExecution {
  std::string maneuver;
};
using ManeuverOutcome = std::variant<ManeuverPerformed, ClarificationRequest, IncorrectExecution>;

/// Throws Error(UnknownManeuver).
ManeuverOutcome execute_maneuver(std::string_view instruction, std::string_view maneuver_id,
                                 PatientState& state);

/// Hold duration stated in an instruction ("30 seconds", "thirty-second",
/// "one minute"), in seconds.
std::optional<double> parse_duration_s(std::string_view instruction);

/// The maneuver a talker utterance is trying to guide, if any: the cued
/// maneuver with the most required elements present (first on ties).
const Maneuver* detect_maneuver(std::string_view utterance, const ScenarioScript& script);

/// Unevoked signs whose closed active window contains t. Pure.
std::vector<const UnevokedSign*> visible_state(const ScenarioScript& script, std::int64_t t_ms);
inline std::vector<const UnevokedSign*> visible_state(const PatientState& state,
                                                      std::int64_t t_ms) {
  return visible_state(*state.scenario, t_ms);
}

/// Fact and red-flag ids whose evidence patterns occur in a patient's words.
/// Used to tag live utterances the same way the simulator tags its own.
std::vector<std::string> extract_findings(std::string_view text, const ScenarioScript& script);

struct PatientReply {
  Json payload;  // PatientUtterance body
  ProbeResult probes;
};

/// Scripted standardized-patient answer to the talker's last utterance.
PatientReply actor_reply(std::string_view talker_utterance, PatientState& state);

/// Full reaction to a talker utterance: an optional ManeuverMarker body when
/// the utterance guided a maneuver, then the spoken reply.
struct PatientResponse {
  std::optional<Json> marker;
  Json utterance;
};
PatientResponse respond(std::string_view talker_utterance, PatientState& state);

}  // namespace telesim::patient
