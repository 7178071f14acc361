#include "telesim/scoring/rubric.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "telesim/common/error.hpp"

namespace telesim::scoring {

using session::EventFrame;
using session::FrameKind;

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::HistoryTaking: return "HistoryTaking";
    case Domain::PhysicalExam: return "PhysicalExam";
    case Domain::ClinicalReasoning: return "ClinicalReasoning";
    case Domain::CommunicationCounseling: return "CommunicationCounseling";
    case Domain::TreatmentSteps: return "TreatmentSteps";
    case Domain::Triage: return "Triage";
    case Domain::RedFlags: return "RedFlags";
  }
  return "?";
}

std::optional<Domain> parse_domain(std::string_view name) {
  for (Domain d : kAllDomains)
    if (to_string(d) == name) return d;
  return std::nullopt;
}

const std::array<UniversalCriterion, 14>& universal_criteria() {
  static const std::array<UniversalCriterion, 14> kCriteria = {{
      {"U01", "To what extent did the doctor elicit the FAMILY HISTORY?"},
      {"U02", "To what extent did the doctor elicit the PAST MEDICAL HISTORY?"},
      {"U03", "To what extent did the doctor construct a sensible DIFFERENTIAL DIAGNOSIS?"},
      {"U04", "To what extent did the doctor explain relevant clinical information ACCURATELY?"},
      {"U05", "To what extent did the doctor select a comprehensive, sensible and appropriate MANAGEMENT PLAN?"},
      {"U06", "To what extent did the doctor elicit the SYSTEMS REVIEW?"},
      {"U07", "To what extent did the doctor confirm the patient's knowledge and understanding?"},
      {"U08", "How empathic was the doctor?"},
      {"U09", "To what extent did the doctor explain relevant clinical information PROFESSIONALLY?"},
      {"U10", "To what extent did the doctor maintain the patient's welfare?"},
      {"U11", "To what extent did the doctor explain relevant clinical information COMPREHENSIVELY?"},
      {"U12", "To what extent did the doctor explain relevant clinical information WITH STRUCTURE?"},
      {"U13", "To what extent did the doctor explain relevant clinical information CLEARLY?"},
      {"U14", "To what extent did the doctor seek, detect, acknowledge and attempt to address the patient's concerns?"},
  }};
  return kCriteria;
}

bool is_universal_criterion(std::string_view id) {
  for (const auto& c : universal_criteria())
    if (c.id == id) return true;
  return false;
}

// ---- evaluation ----

bool Matcher::matches(const EventFrame& f) const {
  if (kind && f.kind != *kind) return false;
  if (text && !text->any(session::payload_text(f))) return false;
  if (!finding.empty()) {
    bool hit = false;
    for (const auto& x : session::payload_findings(f)) hit = hit || x == finding;
    if (!hit && f.kind == FrameKind::FrameObservation)
      for (const auto& s : f.payload.at("signs")) hit = hit || s == finding;
    if (!hit) return false;
  }
  if (!cites.empty()) {
    if (f.kind != FrameKind::TalkerUtteranceChunk) return false;
    bool hit = false;
    for (const auto& c : session::cites_of(f)) hit = hit || c.finding == cites;
    if (!hit) return false;
  }
  if (!maneuver.empty()) {
    if (f.kind != FrameKind::ManeuverMarker || f.payload.value("maneuver", "") != maneuver) return false;
  }
  if (!outcome.empty()) {
    if (f.kind != FrameKind::ManeuverMarker || f.payload.value("outcome", "performed") != outcome) return false;
  }
  return true;
}

bool Predicate::eval(const std::vector<EventFrame>& frames) const {
  switch (op) {
    case Op::Exists:
    case Op::Count: {
      int n = 0;
      int need = op == Op::Exists ? 1 : min;
      for (const auto& f : frames)
        if (matchers.front().matches(f) && ++n >= need) return true;
      return need <= 0;
    }
    case Op::Sequence: {
      std::size_t k = 0;
      for (const auto& f : frames) {
        if (k == matchers.size()) break;
        if (matchers[k].matches(f)) ++k;
      }
      return k == matchers.size();
    }
    case Op::All:
      for (const auto& c : children)
        if (!c.eval(frames)) return false;
      return true;
    case Op::Any:
      for (const auto& c : children)
        if (c.eval(frames)) return true;
      return false;
  }
  return false;
}

int GradingRule::score(const std::vector<EventFrame>& frames) const {
  if (full.eval(frames)) return 2;
  if (partial && partial->eval(frames)) return 1;
  return 0;
}

// ---- parsing ----

namespace {

Matcher parse_matcher(const Json& j, const text::SynonymTable& syn) {
  if (!j.is_object()) throw Error(ErrorCode::Validation, "matcher must be an object");
  static const std::set<std::string> kKeys = {"kind", "text", "finding", "cites", "maneuver", "outcome"};
  Matcher m;
  for (const auto& [k, v] : j.items())
    if (!kKeys.count(k)) throw Error(ErrorCode::Validation, "unknown matcher field '" + k + "'");
  if (auto it = j.find("kind"); it != j.end()) {
    auto name = it->get<std::string>();
    if (name == "talker") name = "TalkerUtteranceChunk";
    if (name == "patient") name = "PatientUtterance";
    m.kind = session::parse_frame_kind(name);
    if (!m.kind) throw Error(ErrorCode::Validation, "unknown frame kind '" + name + "'");
  }
  if (auto it = j.find("text"); it != j.end()) {
    std::vector<std::string> pats = it->is_string() ? std::vector<std::string>{it->get<std::string>()}
                                                    : it->get<std::vector<std::string>>();
    if (pats.empty()) throw Error(ErrorCode::Validation, "matcher text list is empty");
    m.text = text::PatternSet(pats, syn);
  }
  m.finding = j.value("finding", "");
  m.cites = j.value("cites", "");
  m.maneuver = j.value("maneuver", "");
  m.outcome = j.value("outcome", "");
  return m;
}

}  // namespace

Predicate parse_predicate(const Json& j, const text::SynonymTable& syn) {
  if (!j.is_object() || j.size() < 1) throw Error(ErrorCode::Validation, "predicate must be an object");
  Predicate p;
  if (auto it = j.find("exists"); it != j.end()) {
    p.op = Predicate::Op::Exists;
    p.matchers.push_back(parse_matcher(*it, syn));
  } else if (auto it = j.find("count"); it != j.end()) {
    p.op = Predicate::Op::Count;
    p.matchers.push_back(parse_matcher(*it, syn));
    p.min = j.value("min", 1);
    if (p.min < 1) throw Error(ErrorCode::Validation, "count min must be >= 1");
  } else if (auto it = j.find("sequence"); it != j.end()) {
    p.op = Predicate::Op::Sequence;
    if (!it->is_array() || it->empty()) throw Error(ErrorCode::Validation, "sequence needs matchers");
    for (const auto& m : *it) p.matchers.push_back(parse_matcher(m, syn));
  } else if (auto it = j.find("all"); it != j.end()) {
    p.op = Predicate::Op::All;
    if (!it->is_array() || it->empty()) throw Error(ErrorCode::Validation, "all needs predicates");
    for (const auto& c : *it) p.children.push_back(parse_predicate(c, syn));
  } else if (auto it = j.find("any"); it != j.end()) {
    p.op = Predicate::Op::Any;
    if (!it->is_array() || it->empty()) throw Error(ErrorCode::Validation, "any needs predicates");
    for (const auto& c : *it) p.children.push_back(parse_predicate(c, syn));
  } else {
    throw Error(ErrorCode::Validation, "predicate needs one of exists, count, sequence, all, any");
  }
  return p;
}

const RubricItem* CaseRubric::find(std::string_view id) const {
  for (const auto& i : items)
    if (i.id == id) return &i;
  return nullptr;
}

std::vector<const RubricItem*> CaseRubric::items_in(Domain d) const {
  std::vector<const RubricItem*> out;
  for (const auto& i : items)
    if (i.domain == d) out.push_back(&i);
  return out;
}

int CaseRubric::max_score(Domain d) const {
  return kItemMax * static_cast<int>(items_in(d).size());
}

int CaseRubric::max_total() const { return kItemMax * static_cast<int>(items.size()); }

CaseRubric parse_rubric(const Json& doc) {
  std::vector<std::string> v;
  CaseRubric r;
  r.document = doc;
  if (!doc.is_object()) throw ValidationError({"rubric: must be a JSON object"});
  if (doc.value("schema", 0) != 1) v.push_back("schema: must be 1");
  if (!doc.contains("scenario") || !doc["scenario"].is_string() || doc["scenario"].get<std::string>().empty())
    v.push_back("scenario: missing");
  else
    r.scenario = doc["scenario"].get<std::string>();

  text::SynonymTable syn;
  if (auto it = doc.find("synonyms"); it != doc.end()) {
    try {
      for (const auto& [k, alts] : it->items()) syn[k] = alts.get<std::vector<std::string>>();
    } catch (const Json::exception&) {
      v.push_back("synonyms: must map names to string arrays");
    }
  }

  auto domains = doc.find("domains");
  if (domains == doc.end() || !domains->is_object()) {
    v.push_back("domains: missing");
    throw ValidationError(std::move(v));
  }
  for (const auto& [name, _] : domains->items())
    if (!parse_domain(name)) v.push_back("domains." + name + ": unknown domain");

  std::set<std::string> ids;
  for (Domain d : kAllDomains) {
    std::string dn(to_string(d));
    auto it = domains->find(dn);
    if (it == domains->end() || !it->is_array() || it->empty()) {
      v.push_back("domains." + dn + ": must list at least one item");
      continue;
    }
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& ij = (*it)[i];
      std::string where = "domains." + dn + "[" + std::to_string(i) + "]";
      try {
        RubricItem item;
        item.domain = d;
        item.id = ij.at("id").get<std::string>();
        if (!ids.insert(item.id).second) v.push_back(where + ": duplicate item id '" + item.id + "'");
        if (is_universal_criterion(item.id)) v.push_back(where + ": item id collides with a universal criterion");
        item.text = ij.value("text", "");
        if (auto a = ij.find("anchors"); a != ij.end()) {
          for (int k = 0; k < 3; ++k) item.anchors[static_cast<std::size_t>(k)] = a->at(std::to_string(k)).get<std::string>();
        } else {
          v.push_back(where + ".anchors: missing");
        }
        item.non_negotiable = ij.value("non_negotiable", false);
        const auto& rule = ij.at("rule");
        item.rule.full = parse_predicate(rule.at("full"), syn);
        if (rule.contains("partial")) item.rule.partial = parse_predicate(rule.at("partial"), syn);
        r.items.push_back(std::move(item));
      } catch (const Json::exception& e) {
        v.push_back(where + ": " + e.what());
      } catch (const Error& e) {
        v.push_back(where + ": " + e.what());
      }
    }
  }
  if (!v.empty()) throw ValidationError(std::move(v));
  return r;
}

CaseRubric load_rubric(std::string_view document) {
  try {
    return parse_rubric(Json::parse(document));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("rubric document: ") + e.what());
  }
}

CaseRubric load_rubric_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_rubric(buf.str());
}

CaseRubric with_scenario(const CaseRubric& rubric, const std::string& scenario) {
  CaseRubric copy = rubric;
  copy.scenario = scenario;
  copy.document["scenario"] = scenario;
  return copy;
}

}  // namespace telesim::scoring
