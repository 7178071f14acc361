#include "telesim/study/config.hpp"

#include <fstream>

#include "telesim/common/error.hpp"
#include "telesim/common/hash.hpp"

namespace telesim::study {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

BackendSpec parse_backend(const Json& j, const fs::path& base) {
  BackendSpec b;
  b.type = j.value("type", "scripted");
  if (b.type == "scripted") {
    b.script = resolve(base, j.at("script").get<std::string>());
  } else if (b.type == "remote") {
    b.remote.endpoint = j.at("endpoint").get<std::string>();
    b.remote.timeout = std::chrono::milliseconds(j.value("timeout_ms", 10000));
    b.remote.retries = j.value("retries", 0);
    b.remote.api_key_env = j.value("api_key_env", "");
  } else if (b.type == "failing") {
    b.failures = j.value("failures", -1);
    if (j.contains("inner")) b.inner = std::make_shared<BackendSpec>(parse_backend(j.at("inner"), base));
  } else if (b.type != "live") {
    throw Error(ErrorCode::Validation, "unknown backend type '" + b.type + "'");
  }
  return b;
}

}  // namespace

std::shared_ptr<talker::ResponderBackend> BackendSpec::make() const {
  if (type == "scripted") return std::make_shared<talker::ScriptedBackend>(talker::load_talker_script(script));
  if (type == "remote") return std::make_shared<talker::RemoteBackend>(remote);
  if (type == "failing") return std::make_shared<talker::FailingBackend>(inner ? inner->make() : nullptr, failures);
  return nullptr;
}

std::vector<std::string> StudyConfig::scenario_ids() const {
  std::vector<std::string> out;
  for (const auto& [alias, tpl] : scenarios) out.push_back(alias);
  return out;
}

StudyConfig parse_study_config(const Json& j, const fs::path& base) {
  try {
    StudyConfig c;
    c.document = j;
    c.name = j.value("name", "study");
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("arms")) {
      c.arms.clear();
      for (const auto& a : j.at("arms")) c.arms.push_back(arm_from_string(a.get<std::string>()));
    }
    for (const auto& [id, t] : j.at("templates").items())
      c.templates[id] = {resolve(base, t.at("scenario").get<std::string>()),
                         resolve(base, t.at("rubric").get<std::string>())};
    for (const auto& s : j.at("scenarios")) {
      auto alias = s.at("id").get<std::string>();
      auto tpl = s.value("template", alias);
      if (!c.templates.count(tpl))
        throw Error(ErrorCode::Validation, "scenario '" + alias + "' uses unknown template '" + tpl + "'");
      c.scenarios.emplace_back(alias, tpl);
    }
    c.actors = j.at("actors").get<std::vector<std::string>>();
    if (auto r = j.find("replication"); r != j.end()) {
      c.replication.count = r->value("count", 0);
      auto pairs = r->value("pairs", Json::object());
      for (const auto& [sc, p] : pairs.items())
        c.replication.pairs[sc] = {p.at(0).get<std::string>(), p.at(1).get<std::string>()};
    }
    auto backends = j.value("backends", Json::object());
    for (const auto& [arm, spec] : backends.items())
      c.backends[arm_from_string(arm)] = parse_backend(spec, base);
    for (auto arm : c.arms)
      if (!c.backends.count(arm))
        throw Error(ErrorCode::Validation, "no backend configured for arm " + std::string(to_string(arm)));
    if (auto e = j.find("encounter"); e != j.end()) {
      c.encounter.max_turns = e->value("max_turns", c.encounter.max_turns);
      c.encounter.max_duration_ms = e->value("max_duration_ms", c.encounter.max_duration_ms);
      c.encounter.barge_in_grace = e->value("barge_in_grace", c.encounter.barge_in_grace);
      c.encounter.chunk_ms = e->value("chunk_ms", c.encounter.chunk_ms);
      c.encounter.reply_ms = e->value("reply_ms", c.encounter.reply_ms);
    }
    if (auto p = j.find("planner"); p != j.end()) {
      c.encounter.planner.max_stalled_attempts =
          p->value("max_stalled_attempts", c.encounter.planner.max_stalled_attempts);
      c.encounter.planner.question_priority = p->value("question_priority", c.encounter.planner.question_priority);
    }
    if (auto a = j.find("analysis"); a != j.end()) {
      c.analysis.bootstrap_n = a->value("bootstrap_n", c.analysis.bootstrap_n);
      c.analysis.ci_level = a->value("ci_level", c.analysis.ci_level);
      if (a->contains("reference_arm"))
        c.analysis.reference_arm = arm_from_string(a->at("reference_arm").get<std::string>());
      if (a->contains("likert"))
        c.analysis.likert = scoring::parse_likert_mapping(a->at("likert").get<std::string>());
    }
    c.abort_fraction = j.value("abort_fraction", c.abort_fraction);
    c.parallel = j.value("parallel", c.parallel);
    return c;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("study config: ") + e.what());
  }
}

StudyConfig load_study_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return parse_study_config(j, path.parent_path());
}

std::string config_hash(const StudyConfig& config) { return hex64(fnv1a64(config.document.dump())); }

ScenarioStore::ScenarioStore(const StudyConfig& config) {
  std::map<std::string, std::pair<patient::ScenarioScript, scoring::CaseRubric>> loaded;
  for (const auto& [alias, tpl] : config.scenarios) {
    auto it = loaded.find(tpl);
    if (it == loaded.end()) {
      const auto& t = config.templates.at(tpl);
      it = loaded.emplace(tpl, std::make_pair(patient::load_scenario_file(t.scenario),
                                              scoring::load_rubric_file(t.rubric))).first;
      if (it->second.first.id != it->second.second.scenario)
        throw Error(ErrorCode::ScenarioMismatch, "template '" + tpl + "': rubric is for '" +
                                                     it->second.second.scenario + "', scenario is '" +
                                                     it->second.first.id + "'");
    }
    add(alias, it->second.first, it->second.second);
  }
}

void ScenarioStore::add(const std::string& alias, const patient::ScenarioScript& scenario,
                        const scoring::CaseRubric& rubric) {
  scenarios_[alias] = std::make_shared<const patient::ScenarioScript>(
      scenario.id == alias ? scenario : patient::with_id(scenario, alias));
  rubrics_[alias] = rubric.scenario == alias ? rubric : scoring::with_scenario(rubric, alias);
}

std::shared_ptr<const patient::ScenarioScript> ScenarioStore::scenario(const std::string& alias) const {
  auto it = scenarios_.find(alias);
  if (it == scenarios_.end()) throw Error(ErrorCode::UnknownScenario, "unknown scenario '" + alias + "'");
  return it->second;
}

const scoring::CaseRubric& ScenarioStore::rubric(const std::string& alias) const {
  auto it = rubrics_.find(alias);
  if (it == rubrics_.end()) throw Error(ErrorCode::UnknownScenario, "unknown scenario '" + alias + "'");
  return it->second;
}

std::vector<std::string> ScenarioStore::aliases() const {
  std::vector<std::string> out;
  for (const auto& [a, s] : scenarios_) out.push_back(a);
  return out;
}

}  // namespace telesim::study
