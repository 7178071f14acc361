#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "telesim/common/arm.hpp"
#include "telesim/common/json.hpp"

namespace telesim::study {

struct Assignment {
  std::string actor;
  std::string scenario;
  Arm arm = Arm::Coclinician;
  int order_index = 0;  // position of this arm within the (actor, scenario) block

  bool operator==(const Assignment&) const = default;
};

/// Which scenarios get a second actor. Either an explicit map or a count;
/// with a count the scenarios are drawn with the plan seed and the second
/// actor is the next one in the roster after the primary.
struct ReplicationSpec {
  int count = 0;
  std::map<std::string, std::pair<std::string, std::string>> pairs;
};

struct StudyPlan {
  std::uint64_t seed = 0;
  std::vector<Arm> arms;
  std::vector<Assignment> assignments;
  std::map<std::string, std::string> primary;  // scenario -> actor
  std::map<std::string, std::pair<std::string, std::string>> replication;

  std::vector<const Assignment*> for_actor(const std::string& actor) const;
};

/// Scenario i goes to actor i mod |actors|; replicated scenarios add one
/// more actor. Arm order per (actor, scenario) is a seeded uniform shuffle.
/// Throws InfeasibleReplication when the spec can't be met.
StudyPlan make_plan(std::uint64_t seed, const std::vector<std::string>& scenarios,
                    const std::vector<std::string>& actors, const ReplicationSpec& replication,
                    const std::vector<Arm>& arms);

/// Checks every plan invariant; returns the violations.
std::vector<std::string> check_plan(const StudyPlan& plan);

std::string encounter_id(const Assignment& a);

Json to_json(const StudyPlan& plan);
StudyPlan plan_from_json(const Json& j);

}  // namespace telesim::study
