#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace telesim::planner {

enum class GoalKind {
  ElicitHistory,
  VisualInspection,
  GuideExamManeuver,
  EducateUser,
  ScreenRedFlag,
  TriageDecision,
  TreatmentCounsel,
};

inline constexpr std::array<GoalKind, 7> kAllGoalKinds = {
    GoalKind::ElicitHistory,    GoalKind::VisualInspection, GoalKind::GuideExamManeuver,
    GoalKind::EducateUser,      GoalKind::ScreenRedFlag,    GoalKind::TriageDecision,
    GoalKind::TreatmentCounsel};

std::string_view to_string(GoalKind kind);
std::optional<GoalKind> parse_goal_kind(std::string_view name);

/// Default urgency per kind (lower is more urgent). Safety screening first.
constexpr int default_priority(GoalKind kind) {
  switch (kind) {
    case GoalKind::ScreenRedFlag: return 0;
    case GoalKind::TriageDecision: return 1;
    case GoalKind::GuideExamManeuver: return 2;
    case GoalKind::VisualInspection: return 2;
    case GoalKind::ElicitHistory: return 3;
    case GoalKind::EducateUser: return 4;
    case GoalKind::TreatmentCounsel: return 5;
  }
  return 5;
}

}  // namespace telesim::planner
