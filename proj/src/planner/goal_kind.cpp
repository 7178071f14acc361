#include "telesim/planner/goal_kind.hpp"

namespace telesim::planner {

std::string_view to_string(GoalKind kind) {
  switch (kind) {
    case GoalKind::ElicitHistory: return "elicit_history";
    case GoalKind::VisualInspection: return "visual_inspection";
    case GoalKind::GuideExamManeuver: return "guide_exam_maneuver";
    case GoalKind::EducateUser: return "educate_user";
    case GoalKind::ScreenRedFlag: return "screen_red_flag";
    case GoalKind::TriageDecision: return "triage_decision";
    case GoalKind::TreatmentCounsel: return "treatment_counsel";
  }
  return "?";
}

std::optional<GoalKind> parse_goal_kind(std::string_view name) {
  for (GoalKind k : kAllGoalKinds)
    if (to_string(k) == name) return k;
  return std::nullopt;
}

}  // namespace telesim::planner
