#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "telesim/common/json.hpp"
#include "telesim/common/text_match.hpp"
#include "telesim/session/frame.hpp"
#include "telesim/trace/trace.hpp"

namespace telesim::scoring {

enum class Domain {
  HistoryTaking,
  PhysicalExam,
  ClinicalReasoning,
  CommunicationCounseling,
  TreatmentSteps,
  Triage,
  RedFlags,
};

inline constexpr std::array<Domain, 7> kAllDomains = {
    Domain::HistoryTaking,  Domain::PhysicalExam, Domain::ClinicalReasoning,
    Domain::CommunicationCounseling, Domain::TreatmentSteps, Domain::Triage,
    Domain::RedFlags};

std::string_view to_string(Domain d);
std::optional<Domain> parse_domain(std::string_view name);

/// Selects frames. Every present field must hold.
struct Matcher {
  std::optional<session::FrameKind> kind;
  std::optional<text::PatternSet> text;  // any pattern over the payload text
  std::string finding;                   // frame evidences this finding
  std::string cites;                     // talker chunk cites this finding
  std::string maneuver;                  // ManeuverMarker for this maneuver
  std::string outcome;                   // ManeuverMarker outcome

  bool matches(const session::EventFrame& f) const;
};

/// Monotone predicate over a trace: adding frames never turns true to false.
struct Predicate {
  enum class Op { Exists, Count, Sequence, All, Any };
  Op op = Op::Exists;
  std::vector<Matcher> matchers;  // Exists/Count: one; Sequence: in order
  int min = 1;
  std::vector<Predicate> children;

  bool eval(const std::vector<session::EventFrame>& frames) const;
};

/// 2 when `full` holds, 1 when `partial` holds, else 0.
struct GradingRule {
  Predicate full;
  std::optional<Predicate> partial;

  int score(const std::vector<session::EventFrame>& frames) const;
};

struct RubricItem {
  std::string id;
  Domain domain = Domain::HistoryTaking;
  std::string text;
  std::array<std::string, 3> anchors;
  bool non_negotiable = false;
  GradingRule rule;
};

inline constexpr int kItemMax = 2;

struct CaseRubric {
  std::string scenario;
  std::vector<RubricItem> items;
  Json document;

  const RubricItem* find(std::string_view id) const;
  std::vector<const RubricItem*> items_in(Domain d) const;
  int max_score(Domain d) const;
  int max_total() const;
};

/// Throws ValidationError listing every problem (unknown domain, empty
/// domain, duplicate item id, bad predicate, ...).
CaseRubric parse_rubric(const Json& doc);
CaseRubric load_rubric(std::string_view document);
CaseRubric load_rubric_file(const std::filesystem::path& path);
CaseRubric with_scenario(const CaseRubric& rubric, const std::string& scenario);

Predicate parse_predicate(const Json& j, const text::SynonymTable& synonyms);

/// The 14 TelePACES questions rated 1-5, in the order of the inter-rater table.
struct UniversalCriterion {
  std::string_view id;
  std::string_view question;
};
const std::array<UniversalCriterion, 14>& universal_criteria();
bool is_universal_criterion(std::string_view id);

}  // namespace telesim::scoring
