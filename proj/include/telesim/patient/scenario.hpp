#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "telesim/common/json.hpp"
#include "telesim/common/text_match.hpp"
#include "telesim/planner/goal_kind.hpp"

namespace telesim::patient {

inline constexpr int kScenarioSchemaVersion = 1;

enum class DisclosurePolicy { Volunteered, OnSpecificRequest, OnActiveProbe };
enum class Severity { Emergent, Urgent, Routine };

std::string_view to_string(DisclosurePolicy policy);
std::string_view to_string(Severity severity);

struct Fact {
  std::string id;
  std::string value;
  std::string statement;  // what the patient says when disclosing
  std::string question;   // how a clinician would ask (optional)
  DisclosurePolicy disclosure = DisclosurePolicy::OnSpecificRequest;
  std::vector<std::string> probe_patterns;
  std::vector<std::string> evidence_patterns;  // defaults to the statement
  bool omit_on_compound = false;

  text::PatternSet probes;
  text::PatternSet evidence;
};

struct GroundTruth {
  std::string diagnosis;
  Severity severity = Severity::Routine;
};

struct Alternative {
  std::string id;
  std::string diagnosis;
  std::string question;
  std::vector<std::string> exclusion_probe_patterns;
  text::PatternSet exclusion_probes;
};

struct RedFlag {
  std::string id;
  std::vector<std::string> probe_patterns;
  bool present = false;
  std::string statement;
  std::string question;
  std::vector<std::string> evidence_patterns;

  text::PatternSet probes;
  text::PatternSet evidence;
};

struct ScriptedFinding {
  std::string id;
  std::string statement;
};

struct Maneuver {
  std::string id;
  std::string instruction;  // a complete, adequate instruction
  std::vector<std::string> cue_patterns;
  std::vector<std::string> required_instruction_elements;
  ScriptedFinding scripted_finding;
  std::optional<int> min_duration_s;
  int brief_hold_s = 5;

  text::PatternSet cues;
  std::vector<text::Pattern> elements;
};

struct UnevokedSign {
  std::string id;
  std::string description;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
};

struct Escalation {
  std::vector<std::string> threshold_findings;
  std::string required_disposition;
  std::string disposition_statement;
};

struct PatientQuestion {
  std::string id;
  std::string text;
  int at_turn = 0;
};

struct GoalStepSpec {
  std::string slot;
  std::string prompt;
};

struct GoalSpec {
  std::string id;
  planner::GoalKind kind = planner::GoalKind::ElicitHistory;
  std::string instruction;
  std::vector<GoalStepSpec> steps;
  bool stepwise = false;
  std::string maneuver;
  std::optional<int> priority;
};

struct PlannerRule {
  std::string on_finding;
  GoalSpec inject;
};

struct EducationRule {
  std::vector<std::string> patterns;
  std::string instruction;
  text::PatternSet compiled;
};

/// The clinical protocol the supervising planner follows for this case.
struct PlannerProtocol {
  std::vector<GoalSpec> goals;
  std::vector<PlannerRule> rules;
  std::vector<EducationRule> education;
  std::string default_education;
  std::string reasoning_statement;
  std::string treatment_statement;
};

struct ScenarioScript {
  std::string id;
  std::string title;
  std::string chief_concern;
  text::SynonymTable synonyms;
  std::vector<Fact> facts;
  GroundTruth ground_truth;
  std::vector<Alternative> alternatives;
  std::vector<RedFlag> red_flags;
  std::vector<Maneuver> maneuvers;
  std::vector<std::string> impossible_patterns;
  text::PatternSet impossible_instructions;
  std::vector<UnevokedSign> unevoked_signs;
  Escalation escalation;
  std::vector<PatientQuestion> patient_questions;
  PlannerProtocol planner;
  Json document;  // the source document

  const Fact* find_fact(std::string_view id) const;
  const RedFlag* find_red_flag(std::string_view id) const;
  const Maneuver* find_maneuver(std::string_view id) const;
  const UnevokedSign* find_sign(std::string_view id) const;

  /// Every finding id the scenario can evidence: facts, red flags, maneuver
  /// findings, unevoked signs.
  std::set<std::string> finding_ids() const;
};

/// Default impossible-instruction patterns: the agent has no body, so any
/// instruction that relies on one cannot be executed.
const std::vector<std::string>& default_impossible_patterns();

/// Parses and validates. Throws Error(Parse) on malformed JSON and
/// ValidationError listing every violated invariant.
ScenarioScript load_scenario(std::string_view document);
ScenarioScript parse_scenario(const Json& document);
ScenarioScript load_scenario_file(const std::filesystem::path& path);

/// Same script under a different id (study rosters reuse case templates).
ScenarioScript with_id(const ScenarioScript& script, const std::string& id);

}  // namespace telesim::patient
