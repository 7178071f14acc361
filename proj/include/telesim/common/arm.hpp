#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace telesim {

// The four study arms of the crossover design.
enum class Arm {
  Coclinician,
  CoclinicianNoPlanner,
  ComparatorRealtime,
  Human,
};

inline constexpr std::array<Arm, 4> kAllArms = {
    Arm::Coclinician, Arm::CoclinicianNoPlanner, Arm::ComparatorRealtime, Arm::Human};

std::string_view to_string(Arm arm);
std::optional<Arm> parse_arm(std::string_view name);
Arm arm_from_string(std::string_view name);  // throws UnknownArm

}  // namespace telesim
