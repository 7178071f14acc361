#include "telesim/common/arm.hpp"

#include <string>

#include "telesim/common/error.hpp"

namespace telesim {

std::string_view to_string(Arm arm) {
  switch (arm) {
    case Arm::Coclinician: return "coclinician";
    case Arm::CoclinicianNoPlanner: return "coclinician_no_planner";
    case Arm::ComparatorRealtime: return "comparator_realtime";
    case Arm::Human: return "human";
  }
  return "unknown";
}

std::optional<Arm> parse_arm(std::string_view name) {
  for (auto arm : kAllArms) {
    if (to_string(arm) == name) return arm;
  }
  return std::nullopt;
}

Arm arm_from_string(std::string_view name) {
  if (auto arm = parse_arm(name)) return *arm;
  throw Error(ErrorCode::UnknownArm, "unknown arm '" + std::string(name) + "'");
}

}  // namespace telesim
