#include "telesim/patient/scenario.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "telesim/common/error.hpp"

namespace telesim::patient {

std::string_view to_string(DisclosurePolicy policy) {
  switch (policy) {
    case DisclosurePolicy::Volunteered: return "volunteered";
    case DisclosurePolicy::OnSpecificRequest: return "on_specific_request";
    case DisclosurePolicy::OnActiveProbe: return "on_active_probe";
  }
  return "?";
}

std::string_view to_string(Severity severity) {
  switch (severity) {
    case Severity::Emergent: return "emergent";
    case Severity::Urgent: return "urgent";
    case Severity::Routine: return "routine";
  }
  return "?";
}

const std::vector<std::string>& default_impossible_patterns() {
  static const std::vector<std::string> kPatterns = {
      "follow my finger", "my finger", "my hand", "my pen", "squeeze my", "touch my",
      "push against my", "stethoscope",
  };
  return kPatterns;
}

namespace {

// Collects violations while walking the document; field accessors return a
// default when the field is missing or mistyped so parsing can continue.
class Reader {
 public:
  std::vector<std::string> violations;

  void fail(const std::string& where, const std::string& what) {
    violations.push_back(where + ": " + what);
  }

  std::string str(const Json& obj, const std::string& key, const std::string& where,
                  bool required = true) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(where + "." + key, "missing");
      return {};
    }
    if (!it->is_string()) {
      fail(where + "." + key, "must be a string");
      return {};
    }
    if (required && it->get_ref<const std::string&>().empty()) fail(where + "." + key, "empty");
    return it->get<std::string>();
  }

  std::vector<std::string> strings(const Json& obj, const std::string& key,
                                   const std::string& where) {
    std::vector<std::string> out;
    auto it = obj.find(key);
    if (it == obj.end()) return out;
    if (!it->is_array()) {
      fail(where + "." + key, "must be an array of strings");
      return out;
    }
    for (const auto& v : *it) {
      if (!v.is_string()) {
        fail(where + "." + key, "must be an array of strings");
        return {};
      }
      out.push_back(v.get<std::string>());
    }
    return out;
  }

  std::optional<std::int64_t> integer(const Json& obj, const std::string& key,
                                      const std::string& where, bool required) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(where + "." + key, "missing");
      return std::nullopt;
    }
    if (!it->is_number_integer()) {
      fail(where + "." + key, "must be an integer");
      return std::nullopt;
    }
    return it->get<std::int64_t>();
  }

  bool boolean(const Json& obj, const std::string& key, const std::string& where,
               bool fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_boolean()) {
      fail(where + "." + key, "must be a boolean");
      return fallback;
    }
    return it->get<bool>();
  }

  // Array of objects; missing or empty arrays are reported when required.
  const Json* objects(const Json& obj, const std::string& key, const std::string& where,
                      bool required_nonempty) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required_nonempty) fail(where + key, "missing");
      return nullptr;
    }
    if (!it->is_array()) {
      fail(where + key, "must be an array");
      return nullptr;
    }
    if (required_nonempty && it->empty()) fail(where + key, "must not be empty");
    for (const auto& e : *it)
      if (!e.is_object()) {
        fail(where + key, "entries must be objects");
        return nullptr;
      }
    return &*it;
  }

  text::PatternSet patterns(const std::vector<std::string>& sources,
                            const text::SynonymTable& synonyms, const std::string& where) {
    try {
      return text::PatternSet(sources, synonyms);
    } catch (const Error& e) {
      fail(where, e.what());
      return {};
    }
  }
};

// The statement itself, as a phrase pattern.
std::string literal_pattern(const std::string& statement) {
  std::string out;
  for (const auto& t : text::tokenize(statement)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out.empty() ? std::string("\x01") : out;
}

std::string idx(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

GoalSpec read_goal(Reader& r, const Json& g, const std::string& where) {
  GoalSpec spec;
  spec.id = r.str(g, "id", where);
  auto kind_name = r.str(g, "kind", where);
  if (auto k = planner::parse_goal_kind(kind_name)) {
    spec.kind = *k;
  } else if (!kind_name.empty()) {
    r.fail(where + ".kind", "unknown goal kind '" + kind_name + "'");
  }
  spec.instruction = r.str(g, "instruction", where);
  spec.stepwise = r.boolean(g, "stepwise", where, false);
  spec.maneuver = r.str(g, "maneuver", where, false);
  if (auto p = r.integer(g, "priority", where, false)) spec.priority = static_cast<int>(*p);
  if (const Json* steps = r.objects(g, "steps", where + ".", false)) {
    for (std::size_t i = 0; i < steps->size(); ++i) {
      const auto& s = (*steps)[i];
      GoalStepSpec step;
      step.slot = r.str(s, "slot", idx(where + ".steps", i));
      step.prompt = r.str(s, "prompt", idx(where + ".steps", i), false);
      spec.steps.push_back(std::move(step));
    }
  }
  return spec;
}

void check_slot(Reader& r, const ScenarioScript& s, const std::set<std::string>& findings,
                const std::set<std::string>& goal_ids, const std::string& slot,
                const std::string& where) {
  static constexpr std::string_view kDelivered = "delivered:";
  static constexpr std::string_view kExcluded = "excluded:";
  if (slot.rfind(kDelivered, 0) == 0) {
    if (!goal_ids.count(slot.substr(kDelivered.size())))
      r.fail(where, "slot '" + slot + "' names an unknown goal");
    return;
  }
  if (slot.rfind(kExcluded, 0) == 0) {
    auto alt = slot.substr(kExcluded.size());
    bool found = false;
    for (const auto& a : s.alternatives) found = found || a.id == alt;
    if (!found) r.fail(where, "slot '" + slot + "' names an unknown alternative");
    return;
  }
  if (!findings.count(slot)) r.fail(where, "slot '" + slot + "' is not a finding id");
}

}  // namespace

const Fact* ScenarioScript::find_fact(std::string_view fid) const {
  for (const auto& f : facts)
    if (f.id == fid) return &f;
  return nullptr;
}

const RedFlag* ScenarioScript::find_red_flag(std::string_view fid) const {
  for (const auto& f : red_flags)
    if (f.id == fid) return &f;
  return nullptr;
}

const Maneuver* ScenarioScript::find_maneuver(std::string_view mid) const {
  for (const auto& m : maneuvers)
    if (m.id == mid) return &m;
  return nullptr;
}

const UnevokedSign* ScenarioScript::find_sign(std::string_view sid) const {
  for (const auto& sg : unevoked_signs)
    if (sg.id == sid) return &sg;
  return nullptr;
}

std::set<std::string> ScenarioScript::finding_ids() const {
  std::set<std::string> out;
  for (const auto& f : facts) out.insert(f.id);
  for (const auto& f : red_flags) out.insert(f.id);
  for (const auto& m : maneuvers) out.insert(m.scripted_finding.id);
  for (const auto& sg : unevoked_signs) out.insert(sg.id);
  return out;
}

ScenarioScript parse_scenario(const Json& doc) {
  if (!doc.is_object()) throw ValidationError({"document: must be a JSON object"});
  Reader r;
  ScenarioScript s;
  s.document = doc;

  auto schema = r.integer(doc, "schema", "", true);
  if (schema && *schema != kScenarioSchemaVersion)
    r.fail("schema", "unsupported version " + std::to_string(*schema));
  s.id = r.str(doc, "id", "");
  s.title = r.str(doc, "title", "", false);
  s.chief_concern = r.str(doc, "chief_concern", "");

  if (auto it = doc.find("synonyms"); it != doc.end()) {
    if (!it->is_object()) {
      r.fail("synonyms", "must be an object of string arrays");
    } else {
      for (const auto& [name, alts] : it->items())
        s.synonyms[name] = r.strings(*it, name, "synonyms");
    }
  }

  // Finding ids share one namespace: the planner keys evidence by them.
  std::map<std::string, std::string> seen;
  auto claim = [&](const std::string& fid, const std::string& where) {
    if (fid.empty()) return;
    auto [it, fresh] = seen.emplace(fid, where);
    if (!fresh) r.fail(where, "duplicate finding id '" + fid + "' (also " + it->second + ")");
  };

  if (const Json* facts = r.objects(doc, "facts", "", false)) {
    for (std::size_t i = 0; i < facts->size(); ++i) {
      const auto& f = (*facts)[i];
      auto w = idx("facts", i);
      Fact fact;
      fact.id = r.str(f, "id", w);
      claim(fact.id, w);
      fact.value = r.str(f, "value", w, false);
      fact.statement = r.str(f, "statement", w);
      fact.question = r.str(f, "question", w, false);
      auto policy = r.str(f, "disclosure", w);
      if (policy == "volunteered") {
        fact.disclosure = DisclosurePolicy::Volunteered;
      } else if (policy == "on_specific_request") {
        fact.disclosure = DisclosurePolicy::OnSpecificRequest;
      } else if (policy == "on_active_probe") {
        fact.disclosure = DisclosurePolicy::OnActiveProbe;
      } else if (!policy.empty()) {
        r.fail(w + ".disclosure", "unknown policy '" + policy + "'");
      }
      fact.probe_patterns = r.strings(f, "probe_patterns", w);
      if (fact.disclosure != DisclosurePolicy::Volunteered && fact.probe_patterns.empty())
        r.fail(w + ".probe_patterns", "must not be empty for " +
                                          std::string(to_string(fact.disclosure)) + " facts");
      fact.evidence_patterns = r.strings(f, "evidence_patterns", w);
      fact.omit_on_compound = r.boolean(f, "omit_on_compound", w, false);
      fact.probes = r.patterns(fact.probe_patterns, s.synonyms, w + ".probe_patterns");
      if (fact.evidence_patterns.empty()) fact.evidence_patterns = {literal_pattern(fact.statement)};
      fact.evidence = r.patterns(fact.evidence_patterns, s.synonyms, w + ".evidence_patterns");
      s.facts.push_back(std::move(fact));
    }
  }

  if (auto it = doc.find("ground_truth"); it == doc.end() || !it->is_object()) {
    r.fail("ground_truth", "missing");
  } else {
    s.ground_truth.diagnosis = r.str(*it, "diagnosis", "ground_truth");
    auto sev = r.str(*it, "severity", "ground_truth");
    if (sev == "emergent") {
      s.ground_truth.severity = Severity::Emergent;
    } else if (sev == "urgent") {
      s.ground_truth.severity = Severity::Urgent;
    } else if (sev == "routine") {
      s.ground_truth.severity = Severity::Routine;
    } else if (!sev.empty()) {
      r.fail("ground_truth.severity", "unknown severity '" + sev + "'");
    }
  }

  if (const Json* alts = r.objects(doc, "alternatives", "", false)) {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < alts->size(); ++i) {
      const auto& a = (*alts)[i];
      auto w = idx("alternatives", i);
      Alternative alt;
      alt.id = r.str(a, "id", w);
      if (!ids.insert(alt.id).second) r.fail(w + ".id", "duplicate alternative id");
      alt.diagnosis = r.str(a, "diagnosis", w);
      alt.question = r.str(a, "question", w, false);
      alt.exclusion_probe_patterns = r.strings(a, "exclusion_probe_patterns", w);
      alt.exclusion_probes =
          r.patterns(alt.exclusion_probe_patterns, s.synonyms, w + ".exclusion_probe_patterns");
      s.alternatives.push_back(std::move(alt));
    }
  }

  if (const Json* flags = r.objects(doc, "red_flags", "", true)) {
    for (std::size_t i = 0; i < flags->size(); ++i) {
      const auto& f = (*flags)[i];
      auto w = idx("red_flags", i);
      RedFlag flag;
      flag.id = r.str(f, "id", w);
      claim(flag.id, w);
      flag.probe_patterns = r.strings(f, "probe_patterns", w);
      if (flag.probe_patterns.empty()) r.fail(w + ".probe_patterns", "must not be empty");
      if (!f.contains("present")) r.fail(w + ".present", "missing");
      flag.present = r.boolean(f, "present", w, false);
      flag.statement = r.str(f, "statement", w);
      flag.question = r.str(f, "question", w, false);
      flag.evidence_patterns = r.strings(f, "evidence_patterns", w);
      flag.probes = r.patterns(flag.probe_patterns, s.synonyms, w + ".probe_patterns");
      if (flag.evidence_patterns.empty()) flag.evidence_patterns = {literal_pattern(flag.statement)};
      flag.evidence = r.patterns(flag.evidence_patterns, s.synonyms, w + ".evidence_patterns");
      s.red_flags.push_back(std::move(flag));
    }
  }

  if (const Json* ms = r.objects(doc, "maneuvers", "", true)) {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < ms->size(); ++i) {
      const auto& m = (*ms)[i];
      auto w = idx("maneuvers", i);
      Maneuver man;
      man.id = r.str(m, "id", w);
      if (!ids.insert(man.id).second) r.fail(w + ".id", "duplicate maneuver id");
      man.instruction = r.str(m, "instruction", w);
      man.cue_patterns = r.strings(m, "cue_patterns", w);
      if (man.cue_patterns.empty()) r.fail(w + ".cue_patterns", "must not be empty");
      man.required_instruction_elements = r.strings(m, "required_instruction_elements", w);
      if (man.required_instruction_elements.empty())
        r.fail(w + ".required_instruction_elements", "must not be empty");
      if (auto sf = m.find("scripted_finding"); sf == m.end() || !sf->is_object()) {
        r.fail(w + ".scripted_finding", "missing");
      } else {
        man.scripted_finding.id = r.str(*sf, "id", w + ".scripted_finding");
        man.scripted_finding.statement = r.str(*sf, "statement", w + ".scripted_finding");
        claim(man.scripted_finding.id, w + ".scripted_finding");
      }
      if (auto d = r.integer(m, "min_duration_s", w, false)) {
        if (*d <= 0) r.fail(w + ".min_duration_s", "must be positive");
        man.min_duration_s = static_cast<int>(*d);
      }
      if (auto b = r.integer(m, "brief_hold_s", w, false)) {
        if (*b < 0) r.fail(w + ".brief_hold_s", "must be non-negative");
        man.brief_hold_s = static_cast<int>(*b);
      }
      man.cues = r.patterns(man.cue_patterns, s.synonyms, w + ".cue_patterns");
      for (const auto& e : man.required_instruction_elements) {
        try {
          man.elements.emplace_back(e, s.synonyms);
        } catch (const Error& err) {
          r.fail(w + ".required_instruction_elements", err.what());
        }
      }
      if (!man.instruction.empty() && man.elements.size() == man.required_instruction_elements.size()) {
        auto toks = text::tokenize(man.instruction);
        for (const auto& e : man.elements)
          if (!e.matches(toks))
            r.fail(w + ".instruction", "reference instruction lacks element '" + e.source() + "'");
      }
      s.maneuvers.push_back(std::move(man));
    }
  }

  s.impossible_patterns = default_impossible_patterns();
  for (auto& p : r.strings(doc, "impossible_patterns", "")) s.impossible_patterns.push_back(p);
  s.impossible_instructions = r.patterns(s.impossible_patterns, s.synonyms, "impossible_patterns");

  if (const Json* signs = r.objects(doc, "unevoked_signs", "", false)) {
    for (std::size_t i = 0; i < signs->size(); ++i) {
      const auto& g = (*signs)[i];
      auto w = idx("unevoked_signs", i);
      UnevokedSign sign;
      sign.id = r.str(g, "id", w);
      claim(sign.id, w);
      sign.description = r.str(g, "description", w);
      auto win = g.find("active_window");
      if (win == g.end() || !win->is_array() || win->size() != 2 ||
          !(*win)[0].is_number_integer() || !(*win)[1].is_number_integer()) {
        r.fail(w + ".active_window", "must be [start_ms, end_ms]");
      } else {
        sign.start_ms = (*win)[0].get<std::int64_t>();
        sign.end_ms = (*win)[1].get<std::int64_t>();
        if (sign.start_ms < 0 || sign.start_ms > sign.end_ms)
          r.fail(w + ".active_window", "must satisfy 0 <= start_ms <= end_ms");
      }
      s.unevoked_signs.push_back(std::move(sign));
    }
  }

  auto findings = s.finding_ids();

  if (auto it = doc.find("escalation"); it == doc.end() || !it->is_object()) {
    r.fail("escalation", "missing");
  } else {
    s.escalation.threshold_findings = r.strings(*it, "threshold_findings", "escalation");
    if (s.escalation.threshold_findings.empty())
      r.fail("escalation.threshold_findings", "must not be empty");
    for (const auto& f : s.escalation.threshold_findings)
      if (!findings.count(f)) r.fail("escalation.threshold_findings", "unknown finding '" + f + "'");
    s.escalation.required_disposition = r.str(*it, "required_disposition", "escalation");
    s.escalation.disposition_statement =
        r.str(*it, "disposition_statement", "escalation", false);
  }

  if (const Json* qs = r.objects(doc, "patient_questions", "", false)) {
    for (std::size_t i = 0; i < qs->size(); ++i) {
      auto w = idx("patient_questions", i);
      PatientQuestion q;
      q.id = r.str((*qs)[i], "id", w);
      q.text = r.str((*qs)[i], "text", w);
      auto t = r.integer((*qs)[i], "at_turn", w, true);
      if (t && *t < 1) r.fail(w + ".at_turn", "must be >= 1");
      q.at_turn = static_cast<int>(t.value_or(1));
      s.patient_questions.push_back(std::move(q));
    }
  }

  if (auto it = doc.find("planner"); it != doc.end()) {
    if (!it->is_object()) {
      r.fail("planner", "must be an object");
    } else {
      const Json& p = *it;
      auto& proto = s.planner;
      if (const Json* goals = r.objects(p, "goals", "planner.", false))
        for (std::size_t i = 0; i < goals->size(); ++i)
          proto.goals.push_back(read_goal(r, (*goals)[i], idx("planner.goals", i)));
      if (const Json* rules = r.objects(p, "rules", "planner.", false)) {
        for (std::size_t i = 0; i < rules->size(); ++i) {
          auto w = idx("planner.rules", i);
          PlannerRule rule;
          rule.on_finding = r.str((*rules)[i], "on_finding", w);
          if (!rule.on_finding.empty() && !findings.count(rule.on_finding))
            r.fail(w + ".on_finding", "unknown finding '" + rule.on_finding + "'");
          if (auto inj = (*rules)[i].find("inject"); inj == (*rules)[i].end() || !inj->is_object())
            r.fail(w + ".inject", "missing");
          else
            rule.inject = read_goal(r, *inj, w + ".inject");
          proto.rules.push_back(std::move(rule));
        }
      }
      if (const Json* edu = r.objects(p, "education", "planner.", false)) {
        for (std::size_t i = 0; i < edu->size(); ++i) {
          auto w = idx("planner.education", i);
          EducationRule e;
          e.patterns = r.strings((*edu)[i], "patterns", w);
          if (e.patterns.empty()) r.fail(w + ".patterns", "must not be empty");
          e.instruction = r.str((*edu)[i], "instruction", w);
          e.compiled = r.patterns(e.patterns, s.synonyms, w + ".patterns");
          proto.education.push_back(std::move(e));
        }
      }
      proto.default_education = r.str(p, "default_education", "planner", false);
      proto.reasoning_statement = r.str(p, "reasoning_statement", "planner", false);
      proto.treatment_statement = r.str(p, "treatment_statement", "planner", false);

      std::set<std::string> goal_ids;
      auto add_goal_id = [&](const GoalSpec& g, const std::string& w) {
        if (!g.id.empty() && !goal_ids.insert(g.id).second)
          r.fail(w + ".id", "duplicate goal id '" + g.id + "'");
      };
      for (std::size_t i = 0; i < proto.goals.size(); ++i)
        add_goal_id(proto.goals[i], idx("planner.goals", i));
      for (std::size_t i = 0; i < proto.rules.size(); ++i)
        add_goal_id(proto.rules[i].inject, idx("planner.rules", i) + ".inject");
      auto check_goal = [&](const GoalSpec& g, const std::string& w) {
        for (std::size_t k = 0; k < g.steps.size(); ++k)
          check_slot(r, s, findings, goal_ids, g.steps[k].slot, idx(w + ".steps", k) + ".slot");
        if (!g.maneuver.empty() && !s.find_maneuver(g.maneuver))
          r.fail(w + ".maneuver", "unknown maneuver '" + g.maneuver + "'");
      };
      for (std::size_t i = 0; i < proto.goals.size(); ++i)
        check_goal(proto.goals[i], idx("planner.goals", i));
      for (std::size_t i = 0; i < proto.rules.size(); ++i)
        check_goal(proto.rules[i].inject, idx("planner.rules", i) + ".inject");
    }
  }

  if (!r.violations.empty()) throw ValidationError(std::move(r.violations));
  return s;
}

ScenarioScript load_scenario(std::string_view document) {
  Json doc;
  try {
    doc = Json::parse(document);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("scenario document: ") + e.what());
  }
  return parse_scenario(doc);
}

ScenarioScript load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_scenario(buf.str());
}

ScenarioScript with_id(const ScenarioScript& script, const std::string& id) {
  ScenarioScript copy = script;
  copy.id = id;
  copy.document["id"] = id;
  return copy;
}

}  // namespace telesim::patient
