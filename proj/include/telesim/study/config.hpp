#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "telesim/common/arm.hpp"
#include "telesim/common/json.hpp"
#include "telesim/patient/scenario.hpp"
#include "telesim/scoring/rubric.hpp"
#include "telesim/scoring/scoring.hpp"
#include "telesim/study/encounter.hpp"
#include "telesim/study/plan.hpp"
#include "telesim/talker/talker.hpp"

namespace telesim::study {

/// How an arm's talker is produced. `live` means a human fulfils the
/// encounter through the service.
struct BackendSpec {
  std::string type = "scripted";  // scripted | remote | live | failing
  std::filesystem::path script;
  talker::RemoteConfig remote;
  int failures = -1;  // failing: how many calls fail (-1 = all)
  std::shared_ptr<BackendSpec> inner;  // failing: wrapped backend

  std::shared_ptr<talker::ResponderBackend> make() const;  // null for live
};

struct ScenarioTemplate {
  std::filesystem::path scenario;
  std::filesystem::path rubric;
};

struct AnalysisSettings {
  int bootstrap_n = 10000;
  double ci_level = 0.95;
  Arm reference_arm = Arm::Coclinician;
  scoring::LikertMapping likert = scoring::LikertMapping::RatingOverFive;
};

struct StudyConfig {
  std::string name = "study";
  std::uint64_t seed = 0;
  std::vector<Arm> arms{kAllArms.begin(), kAllArms.end()};
  std::map<std::string, ScenarioTemplate> templates;
  std::vector<std::pair<std::string, std::string>> scenarios;  // alias, template
  std::vector<std::string> actors;
  ReplicationSpec replication;
  std::map<Arm, BackendSpec> backends;
  EncounterOptions encounter;
  AnalysisSettings analysis;
  double abort_fraction = 0.25;  // abort the study once more than this fraction failed
  bool parallel = true;
  Json document;  // as loaded, for hashing

  std::vector<std::string> scenario_ids() const;
};

/// Relative paths resolve against the config file's directory.
StudyConfig parse_study_config(const Json& j, const std::filesystem::path& base_dir);
StudyConfig load_study_config(const std::filesystem::path& path);

/// Stable digest of the config document.
std::string config_hash(const StudyConfig& config);

/// Loaded scenarios and rubrics keyed by scenario alias. Aliases that share a
/// template share the parsed documents, re-keyed to the alias.
class ScenarioStore {
 public:
  ScenarioStore() = default;
  explicit ScenarioStore(const StudyConfig& config);

  void add(const std::string& alias, const patient::ScenarioScript& scenario,
           const scoring::CaseRubric& rubric);
  bool contains(const std::string& alias) const { return scenarios_.count(alias) > 0; }
  std::shared_ptr<const patient::ScenarioScript> scenario(const std::string& alias) const;
  const scoring::CaseRubric& rubric(const std::string& alias) const;
  std::vector<std::string> aliases() const;

 private:
  std::map<std::string, std::shared_ptr<const patient::ScenarioScript>> scenarios_;
  std::map<std::string, scoring::CaseRubric> rubrics_;
};

}  // namespace telesim::study
