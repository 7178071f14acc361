#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "telesim/common/json.hpp"
#include "telesim/patient/scenario.hpp"
#include "telesim/planner/goal_kind.hpp"
#include "telesim/session/frame.hpp"

namespace telesim::planner {

enum class GoalStatus { Pending, Active, Satisfied, Abandoned };
std::string_view to_string(GoalStatus status);

enum class DifferentialStatus { Active, Excluded, ConfirmedSuspicion };
std::string_view to_string(DifferentialStatus status);

struct FindingRecord {
  std::string value;
  session::EvidenceSource source = session::EvidenceSource::PatientReported;
  std::uint64_t frame = 0;
  bool operator==(const FindingRecord&) const = default;
};

struct Differential {
  std::string id;
  std::string label;
  DifferentialStatus status = DifferentialStatus::Active;
  bool operator==(const Differential&) const = default;
};

struct GoalStep {
  std::string slot;    // finding id, "delivered:<goal>" or "excluded:<alternative>"
  std::string prompt;  // what to ask when only this slot is missing
  bool operator==(const GoalStep&) const = default;
};

struct Constraint {
  int min_duration_s = 0;
  bool operator==(const Constraint&) const = default;
};

struct Goal {
  std::string id;
  GoalKind kind = GoalKind::ElicitHistory;
  GoalStatus status = GoalStatus::Pending;
  std::vector<GoalStep> steps;
  bool stepwise = false;  // one step per directive, in order
  std::string instruction;
  int priority = 0;
  int injected_at_turn = 0;
  std::uint64_t order = 0;  // FIFO tie-break, assigned on injection
  std::string maneuver;
  std::optional<int> protocol_min_duration_s;
  std::optional<Constraint> constraint;
  int stalled = 0;   // consecutive realizations that produced no new evidence
  int progress = 0;  // slots evidenced at the last turn boundary

  std::vector<std::string> required_slots() const;
  bool open() const { return status == GoalStatus::Pending || status == GoalStatus::Active; }
  bool operator==(const Goal&) const = default;
};

Goal make_goal(const patient::GoalSpec& spec, const patient::ScenarioScript& script);

struct Directive {
  std::string goal_id;
  GoalKind kind = GoalKind::ElicitHistory;
  std::string instruction;
  int priority = 0;
  std::vector<session::Cite> cites;  // findings the talker should acknowledge
  bool operator==(const Directive&) const = default;
};

Json to_json(const Directive& d);
Directive directive_from_json(const Json& j);  // DirectiveInjected payload

struct EncounterModel {
  std::map<std::string, FindingRecord> findings;
  std::vector<Differential> differentials;
  std::vector<Goal> goals;
  int turn_count = 0;
  std::uint64_t next_seq = 0;        // first seq not yet ingested
  std::uint64_t next_order = 0;
  std::set<std::string> delivered;   // goals the talker has realized
  std::set<std::string> excluded;    // alternatives ruled out
  std::set<std::string> unacknowledged;
  std::set<std::string> realized_this_turn;
  std::string talker_text;           // talker speech since the patient last spoke
  bool operator==(const EncounterModel&) const = default;

  const Goal* find_goal(std::string_view id) const;
};

struct PlannerOptions {
  // Realizations of one goal in a row without new evidence before it is
  // abandoned; 0 disables abandonment.
  int max_stalled_attempts = 3;
  // Priority of educate_user goals raised by a patient question, so the
  // answer comes before the exam resumes.
  int question_priority = 1;
};

/// Goals seeded from the script's protocol, all pending at turn 0.
EncounterModel initial_model(const patient::ScenarioScript& script);

/// Throws Error(DuplicateGoal).
EncounterModel inject_goal(EncounterModel model, Goal goal);

bool slot_evidenced(const EncounterModel& model, const std::string& slot);

/// satisfied iff every required slot is evidenced; never regresses.
GoalStatus resolve_goal_status(const Goal& goal, const EncounterModel& model);

/// Insufficient maneuver performance keeps the goal active and raises its
/// duration constraint to the protocol minimum. Throws Error(NotManeuverGoal).
Goal course_correct(Goal goal, const session::EventFrame& marker);

/// Throws Error(NonContiguousDelta) unless frames start at model.next_seq
/// and are consecutive.
EncounterModel ingest_delta(EncounterModel model, std::span<const session::EventFrame> frames,
                            const patient::ScenarioScript& script,
                            const PlannerOptions& options = {});

/// One directive per open goal, ordered by (priority, injected_at_turn, FIFO).
std::vector<Directive> plan_directives(const EncounterModel& model);

/// Instruction the talker should realize for a goal right now.
std::string current_instruction(const Goal& goal, const EncounterModel& model);

Json snapshot_json(const EncounterModel& model);

/// Stateful wrapper owned by one session: ingests log deltas and produces
/// the frames to post at the next turn boundary.
class Planner {
 public:
  Planner(std::shared_ptr<const patient::ScenarioScript> script, PlannerOptions options = {});

  /// Ingests and returns GoalStateChange frames for status changes followed
  /// by DirectiveInjected frames for new or reworded directives.
  std::vector<session::FrameBody> ingest(std::span<const session::EventFrame> frames);

  std::vector<Directive> directives() const { return plan_directives(model_); }
  const EncounterModel& model() const noexcept { return model_; }
  std::uint64_t next_seq() const noexcept { return model_.next_seq; }
  /// Per-turn snapshots, in order (for the console's inspector).
  const std::vector<Json>& snapshots() const noexcept { return snapshots_; }

 private:
  std::shared_ptr<const patient::ScenarioScript> script_;
  PlannerOptions options_;
  EncounterModel model_;
  std::map<std::string, std::string> posted_;  // goal id -> last posted instruction
  std::vector<Json> snapshots_;
};

}  // namespace telesim::planner
