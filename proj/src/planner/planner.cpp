#include "telesim/planner/planner.hpp"

#include <algorithm>

#include "telesim/common/error.hpp"
#include "telesim/patient/patient.hpp"

namespace telesim::planner {

using session::EventFrame;
using session::EvidenceSource;
using session::FrameKind;

namespace {

constexpr std::string_view kDelivered = "delivered:";
constexpr std::string_view kExcluded = "excluded:";
constexpr const char* kTriageId = "triage_decision";
constexpr const char* kTreatmentId = "treatment_counsel";

bool starts_with(const std::string& s, std::string_view prefix) {
  return s.rfind(prefix, 0) == 0;
}

Goal* find_goal_mut(EncounterModel& m, std::string_view id) {
  for (auto& g : m.goals)
    if (g.id == id) return &g;
  return nullptr;
}

int evidenced_count(const Goal& g, const EncounterModel& m) {
  int n = 0;
  for (const auto& s : g.steps) n += slot_evidenced(m, s.slot) ? 1 : 0;
  return n;
}

std::string finding_value(const patient::ScenarioScript& s, const std::string& id) {
  if (const auto* f = s.find_fact(id)) return f->value.empty() ? f->statement : f->value;
  if (const auto* f = s.find_red_flag(id)) return f->present ? "present" : "absent";
  for (const auto& m : s.maneuvers)
    if (m.scripted_finding.id == id) return m.scripted_finding.statement;
  if (const auto* sign = s.find_sign(id)) return sign->description;
  return {};
}

void record_finding(EncounterModel& m, const patient::ScenarioScript& s, const std::string& id,
                    EvidenceSource source, std::uint64_t seq) {
  if (m.findings.count(id)) return;  // first evidence wins; later frames only corroborate
  m.findings[id] = FindingRecord{finding_value(s, id), source, seq};
  m.unacknowledged.insert(id);
}

void add_findings(EncounterModel& m, const patient::ScenarioScript& s,
                  const std::vector<std::string>& ids, EvidenceSource source,
                  std::uint64_t seq) {
  auto known = s.finding_ids();
  for (const auto& id : ids)
    if (known.count(id)) record_finding(m, s, id, source, seq);
}

bool concerns_maneuver(const Goal& g, const patient::ScenarioScript& s,
                       const std::string& maneuver) {
  if (g.maneuver == maneuver) return true;
  const auto* m = s.find_maneuver(maneuver);
  if (!m) return false;
  for (const auto& st : g.steps)
    if (st.slot == m->scripted_finding.id) return true;
  return false;
}

void update_statuses(EncounterModel& m) {
  for (auto& g : m.goals) {
    if (!g.open()) continue;
    g.status = resolve_goal_status(g, m);
  }
}

void inject_if_absent(EncounterModel& m, Goal g) {
  if (find_goal_mut(m, g.id)) return;
  m = inject_goal(std::move(m), std::move(g));
}

void apply_protocol_rules(EncounterModel& m, const patient::ScenarioScript& s) {
  for (const auto& rule : s.planner.rules)
    if (m.findings.count(rule.on_finding)) inject_if_absent(m, make_goal(rule.inject, s));

  if (m.differentials.empty()) return;  // nothing heard from the patient yet

  if (!find_goal_mut(m, kTriageId)) {
    bool threshold = !s.escalation.threshold_findings.empty();
    for (const auto& f : s.escalation.threshold_findings) threshold = threshold && m.findings.count(f);
    bool workup_done = std::none_of(m.goals.begin(), m.goals.end(),
                                    [](const Goal& g) { return g.open(); });
    if (threshold) {
      for (auto& d : m.differentials)
        if (d.id == "ground_truth") d.status = DifferentialStatus::ConfirmedSuspicion;
    }
    if (threshold || workup_done) {
      Goal g;
      g.id = kTriageId;
      g.kind = GoalKind::TriageDecision;
      std::string disposition = s.escalation.disposition_statement.empty()
                                    ? "My recommendation is " + s.escalation.required_disposition + "."
                                    : s.escalation.disposition_statement;
      g.instruction = s.planner.reasoning_statement.empty()
                          ? disposition
                          : s.planner.reasoning_statement + " " + disposition;
      g.priority = default_priority(GoalKind::TriageDecision);
      g.steps = {{std::string(kDelivered) + kTriageId, ""}};
      inject_if_absent(m, std::move(g));
    }
  }

  const Goal* triage = find_goal_mut(m, kTriageId);
  if (triage && triage->status == GoalStatus::Satisfied && !s.planner.treatment_statement.empty()) {
    Goal g;
    g.id = kTreatmentId;
    g.kind = GoalKind::TreatmentCounsel;
    g.instruction = s.planner.treatment_statement;
    g.priority = default_priority(GoalKind::TreatmentCounsel);
    g.steps = {{std::string(kDelivered) + kTreatmentId, ""}};
    inject_if_absent(m, std::move(g));
  }
}

void turn_boundary(EncounterModel& m, const EventFrame& f, const patient::ScenarioScript& s,
                   const PlannerOptions& opt) {
  auto talker = text::tokenize(m.talker_text);
  for (const auto& alt : s.alternatives) {
    if (m.excluded.count(alt.id) || !alt.exclusion_probes.any(talker)) continue;
    m.excluded.insert(alt.id);
    for (auto& d : m.differentials)
      if (d.id == alt.id) d.status = DifferentialStatus::Excluded;
  }

  auto said = session::payload_text(f);
  if (said.find('?') != std::string::npos) {
    std::string instruction;
    auto toks = text::tokenize(said);
    for (const auto& rule : s.planner.education)
      if (rule.compiled.any(toks)) {
        instruction = rule.instruction;
        break;
      }
    if (instruction.empty()) instruction = s.planner.default_education;
    if (!instruction.empty()) {
      int n = 1;
      for (const auto& g : m.goals) n += g.kind == GoalKind::EducateUser ? 1 : 0;
      Goal g;
      g.id = "educate_" + std::to_string(n);
      while (find_goal_mut(m, g.id)) g.id += "_";
      g.kind = GoalKind::EducateUser;
      g.instruction = instruction;
      g.priority = opt.question_priority;
      g.steps = {{std::string(kDelivered) + g.id, ""}};
      m = inject_goal(std::move(m), std::move(g));
    }
  }

  update_statuses(m);
  for (auto& g : m.goals) {
    int now = evidenced_count(g, m);
    if (m.realized_this_turn.count(g.id) && g.open()) {
      g.stalled = now > g.progress ? 0 : g.stalled + 1;
      if (opt.max_stalled_attempts > 0 && g.stalled >= opt.max_stalled_attempts)
        g.status = GoalStatus::Abandoned;
    }
    g.progress = now;
  }
  m.realized_this_turn.clear();
  m.talker_text.clear();
  ++m.turn_count;
}

}  // namespace

std::string_view to_string(GoalStatus status) {
  switch (status) {
    case GoalStatus::Pending: return "pending";
    case GoalStatus::Active: return "active";
    case GoalStatus::Satisfied: return "satisfied";
    case GoalStatus::Abandoned: return "abandoned";
  }
  return "?";
}

std::string_view to_string(DifferentialStatus status) {
  switch (status) {
    case DifferentialStatus::Active: return "active";
    case DifferentialStatus::Excluded: return "excluded";
    case DifferentialStatus::ConfirmedSuspicion: return "confirmed-suspicion";
  }
  return "?";
}

std::vector<std::string> Goal::required_slots() const {
  std::vector<std::string> out;
  for (const auto& s : steps) out.push_back(s.slot);
  return out;
}

Goal make_goal(const patient::GoalSpec& spec, const patient::ScenarioScript& script) {
  Goal g;
  g.id = spec.id;
  g.kind = spec.kind;
  g.instruction = spec.instruction;
  g.stepwise = spec.stepwise;
  g.maneuver = spec.maneuver;
  g.priority = spec.priority.value_or(default_priority(spec.kind));
  for (const auto& st : spec.steps) g.steps.push_back({st.slot, st.prompt});
  if (const auto* m = script.find_maneuver(spec.maneuver)) g.protocol_min_duration_s = m->min_duration_s;
  return g;
}

Json to_json(const Directive& d) {
  Json cites = Json::array();
  for (const auto& c : d.cites) cites.push_back(session::to_json(c));
  return Json{{"goal_id", d.goal_id}, {"goal_kind", std::string(to_string(d.kind))},
              {"instruction", d.instruction}, {"priority", d.priority}, {"cites", cites}};
}

Directive directive_from_json(const Json& j) {
  session::validate_payload(FrameKind::DirectiveInjected, j);
  Directive d;
  d.goal_id = j.at("goal_id").get<std::string>();
  auto kind = parse_goal_kind(j.at("goal_kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::MalformedPayload, "unknown goal kind in directive");
  d.kind = *kind;
  d.instruction = j.at("instruction").get<std::string>();
  d.priority = j.at("priority").get<int>();
  if (auto it = j.find("cites"); it != j.end() && it->is_array())
    for (const auto& c : *it) d.cites.push_back(session::cite_from_json(c));
  return d;
}

const Goal* EncounterModel::find_goal(std::string_view id) const {
  for (const auto& g : goals)
    if (g.id == id) return &g;
  return nullptr;
}

EncounterModel initial_model(const patient::ScenarioScript& script) {
  EncounterModel m;
  for (const auto& spec : script.planner.goals) m = inject_goal(std::move(m), make_goal(spec, script));
  return m;
}

EncounterModel inject_goal(EncounterModel model, Goal goal) {
  if (model.find_goal(goal.id))
    throw Error(ErrorCode::DuplicateGoal, "duplicate goal id '" + goal.id + "'");
  goal.status = GoalStatus::Pending;
  goal.injected_at_turn = model.turn_count;
  goal.order = model.next_order++;
  goal.stalled = 0;
  goal.progress = evidenced_count(goal, model);
  model.goals.push_back(std::move(goal));
  return model;
}

bool slot_evidenced(const EncounterModel& model, const std::string& slot) {
  if (starts_with(slot, kDelivered)) return model.delivered.count(slot.substr(kDelivered.size())) > 0;
  if (starts_with(slot, kExcluded)) return model.excluded.count(slot.substr(kExcluded.size())) > 0;
  return model.findings.count(slot) > 0;
}

GoalStatus resolve_goal_status(const Goal& goal, const EncounterModel& model) {
  if (goal.status == GoalStatus::Satisfied || goal.status == GoalStatus::Abandoned) return goal.status;
  for (const auto& s : goal.steps)
    if (!slot_evidenced(model, s.slot)) return goal.status;
  return GoalStatus::Satisfied;
}

Goal course_correct(Goal goal, const EventFrame& marker) {
  if (goal.kind != GoalKind::GuideExamManeuver)
    throw Error(ErrorCode::NotManeuverGoal,
                "course correction applies to guide_exam_maneuver goals, not " +
                    std::string(to_string(goal.kind)));
  if (marker.kind != FrameKind::ManeuverMarker)
    throw Error(ErrorCode::InvalidArgument, "course correction needs a ManeuverMarker frame");
  const auto& p = marker.payload;
  double held = p.value("duration_s", 0.0);
  bool performed = p.value("outcome", std::string("performed")) == "performed";
  bool found = !session::payload_findings(marker).empty();
  int required = goal.constraint ? goal.constraint->min_duration_s
                                 : goal.protocol_min_duration_s.value_or(0);
  bool too_short = required > 0 && held < required;
  if (!too_short && performed && found) return goal;  // adequate; satisfaction decides
  if (goal.status == GoalStatus::Pending) goal.status = GoalStatus::Active;
  if (too_short) goal.constraint = Constraint{required};
  return goal;
}

EncounterModel ingest_delta(EncounterModel m, std::span<const EventFrame> frames,
                            const patient::ScenarioScript& s, const PlannerOptions& opt) {
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i].seq != m.next_seq + i)
      throw Error(ErrorCode::NonContiguousDelta,
                  "expected seq " + std::to_string(m.next_seq + i) + ", got " +
                      std::to_string(frames[i].seq));

  for (const auto& f : frames) {
    ++m.next_seq;
    switch (f.kind) {
      case FrameKind::PatientUtterance: {
        if (m.differentials.empty()) {
          m.differentials.push_back({"ground_truth", s.ground_truth.diagnosis, DifferentialStatus::Active});
          for (const auto& a : s.alternatives)
            m.differentials.push_back({a.id, a.diagnosis, DifferentialStatus::Active});
        }
        auto ids = session::payload_findings(f);
        for (auto& id : patient::extract_findings(session::payload_text(f), s)) ids.push_back(id);
        add_findings(m, s, ids, EvidenceSource::PatientReported, f.seq);
        break;
      }
      case FrameKind::FrameObservation: {
        auto ids = session::payload_findings(f);
        for (const auto& sign : f.payload.at("signs")) ids.push_back(sign.get<std::string>());
        add_findings(m, s, ids, EvidenceSource::Observed, f.seq);
        break;
      }
      case FrameKind::ManeuverMarker: {
        add_findings(m, s, session::payload_findings(f), EvidenceSource::Observed, f.seq);
        auto man = f.payload.at("maneuver").get<std::string>();
        for (auto& g : m.goals)
          if (g.open() && g.kind == GoalKind::GuideExamManeuver && concerns_maneuver(g, s, man) &&
              resolve_goal_status(g, m) != GoalStatus::Satisfied)
            g = course_correct(std::move(g), f);
        break;
      }
      case FrameKind::TalkerUtteranceChunk: {
        auto text = session::payload_text(f);
        if (!m.talker_text.empty()) m.talker_text += ' ';
        m.talker_text += text;
        for (const auto& c : session::cites_of(f)) m.unacknowledged.erase(c.finding);
        if (auto it = f.payload.find("directive"); it != f.payload.end() && it->is_string()) {
          auto id = it->get<std::string>();
          if (Goal* g = find_goal_mut(m, id)) {
            if (g->status == GoalStatus::Pending) g->status = GoalStatus::Active;
            m.realized_this_turn.insert(id);
            m.delivered.insert(id);
          }
        }
        break;
      }
      default:
        break;
    }
    update_statuses(m);
    apply_protocol_rules(m, s);
    if (session::is_patient_turn_end(f)) {
      turn_boundary(m, f, s, opt);
      apply_protocol_rules(m, s);
    }
  }
  return m;
}

std::string current_instruction(const Goal& goal, const EncounterModel& model) {
  std::vector<const GoalStep*> missing;
  for (const auto& st : goal.steps)
    if (!slot_evidenced(model, st.slot)) missing.push_back(&st);

  std::string text;
  if (goal.stepwise && !missing.empty()) {
    text = missing.front()->prompt.empty() ? goal.instruction : missing.front()->prompt;
  } else if (!missing.empty() && missing.size() < goal.steps.size()) {
    for (const auto* st : missing) {
      if (st->prompt.empty()) continue;
      if (!text.empty()) text += ' ';
      text += st->prompt;
    }
  }
  if (text.empty()) text = goal.instruction;
  if (goal.constraint)
    text += " Please hold that position for " + std::to_string(goal.constraint->min_duration_s) +
            " seconds while I watch.";
  return text;
}

std::vector<Directive> plan_directives(const EncounterModel& model) {
  std::vector<const Goal*> open;
  for (const auto& g : model.goals)
    if (g.open()) open.push_back(&g);
  std::stable_sort(open.begin(), open.end(), [](const Goal* a, const Goal* b) {
    return std::tie(a->priority, a->injected_at_turn, a->order) <
           std::tie(b->priority, b->injected_at_turn, b->order);
  });

  std::vector<Directive> out;
  for (const Goal* g : open) out.push_back({g->id, g->kind, current_instruction(*g, model), g->priority, {}});
  if (out.empty()) return out;

  // The top directive carries the evidence the talker should acknowledge.
  std::set<std::string> cite_ids = model.unacknowledged;
  if (out.front().kind == GoalKind::TriageDecision)
    for (const auto& [id, rec] : model.findings) cite_ids.insert(id);
  for (const auto& id : cite_ids) {
    auto it = model.findings.find(id);
    if (it == model.findings.end()) continue;
    out.front().cites.push_back({id, it->second.source, it->second.frame});
  }
  return out;
}

Json snapshot_json(const EncounterModel& model) {
  Json findings = Json::object();
  for (const auto& [id, r] : model.findings)
    findings[id] = Json{{"value", r.value}, {"source", std::string(session::to_string(r.source))},
                        {"frame", r.frame}};
  Json diffs = Json::array();
  for (const auto& d : model.differentials)
    diffs.push_back({{"id", d.id}, {"label", d.label}, {"status", std::string(to_string(d.status))}});
  Json goals = Json::array();
  for (const auto& g : model.goals) {
    Json gj{{"id", g.id},
            {"kind", std::string(to_string(g.kind))},
            {"status", std::string(to_string(g.status))},
            {"priority", g.priority},
            {"injected_at_turn", g.injected_at_turn},
            {"required_slots", g.required_slots()}};
    if (g.constraint) gj["constraint"] = Json{{"min_duration_s", g.constraint->min_duration_s}};
    goals.push_back(std::move(gj));
  }
  Json directives = Json::array();
  for (const auto& d : plan_directives(model)) directives.push_back(to_json(d));
  return Json{{"turn", model.turn_count}, {"next_seq", model.next_seq}, {"findings", findings},
              {"differentials", diffs},   {"goals", goals},                {"directives", directives}};
}

Planner::Planner(std::shared_ptr<const patient::ScenarioScript> script, PlannerOptions options)
    : script_(std::move(script)), options_(options), model_(initial_model(*script_)) {}

std::vector<session::FrameBody> Planner::ingest(std::span<const EventFrame> frames) {
  std::map<std::string, GoalStatus> before;
  for (const auto& g : model_.goals) before[g.id] = g.status;
  int turn = model_.turn_count;
  model_ = ingest_delta(std::move(model_), frames, *script_, options_);

  std::vector<session::FrameBody> out;
  for (const auto& g : model_.goals) {
    auto it = before.find(g.id);
    std::string from = it == before.end() ? "none" : std::string(to_string(it->second));
    std::string to(to_string(g.status));
    if (from == to) continue;
    out.push_back({FrameKind::GoalStateChange, Json{{"goal_id", g.id}, {"from", from}, {"to", to}}});
  }
  for (const auto& d : plan_directives(model_)) {
    auto& last = posted_[d.goal_id];
    if (last == d.instruction) continue;
    last = d.instruction;
    out.push_back({FrameKind::DirectiveInjected, to_json(d)});
  }
  if (model_.turn_count != turn) snapshots_.push_back(snapshot_json(model_));
  return out;
}

}  // namespace telesim::planner
