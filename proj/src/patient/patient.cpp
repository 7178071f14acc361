#include "telesim/patient/patient.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "telesim/common/error.hpp"

namespace telesim::patient {

namespace {

constexpr const char* kHedge = "Hmm, I'm not sure, maybe now and then.";
constexpr const char* kNothing = "I'm not sure. Nothing else comes to mind.";
constexpr const char* kOkay = "Okay.";
constexpr const char* kClarify = "Sorry, I'm not sure what you want me to do.";
constexpr const char* kIncorrect = "I'm not sure how to do that. I can't see what you mean.";
constexpr const char* kBriefHold = "Okay, I'm holding it like this.";

std::optional<double> number_word(const std::string& tok) {
  static const std::map<std::string, double> kWords = {
      {"a", 1},        {"an", 1},        {"one", 1},      {"two", 2},       {"three", 3},
      {"four", 4},     {"five", 5},      {"six", 6},      {"seven", 7},     {"eight", 8},
      {"nine", 9},     {"ten", 10},      {"eleven", 11},  {"twelve", 12},   {"fifteen", 15},
      {"twenty", 20},  {"thirty", 30},   {"forty", 40},   {"forty-five", 45}, {"fifty", 50},
      {"sixty", 60},   {"ninety", 90},
  };
  if (auto it = kWords.find(tok); it != kWords.end()) return it->second;
  double v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec == std::errc() && p == tok.data() + tok.size()) return v;
  return std::nullopt;
}

std::optional<double> unit_seconds(const std::string& tok) {
  if (tok == "second" || tok == "seconds" || tok == "sec" || tok == "secs" || tok == "s")
    return 1.0;
  if (tok == "minute" || tok == "minutes" || tok == "min" || tok == "mins") return 60.0;
  return std::nullopt;
}

bool is_undisclosed_gated(const PatientState& st, const std::string& id) {
  return !st.disclosed.count(id);
}

}  // namespace

PatientState::PatientState(std::shared_ptr<const ScenarioScript> script)
    : scenario(std::move(script)) {
  if (!scenario) throw Error(ErrorCode::InvalidArgument, "patient needs a scenario");
}

ProbeResult match_probe(std::string_view question, PatientState& st) {
  const auto& s = *st.scenario;
  auto toks = text::tokenize(question);
  // Statements that merely mention a disclosed finding don't get it repeated;
  // a direct question does.
  const bool asked = question.find('?') != std::string_view::npos;
  ProbeResult out;

  std::vector<const Fact*> facts;
  std::vector<const RedFlag*> flags;
  int fresh_gated = 0;
  for (const auto& f : s.facts) {
    if (!f.probes.any(toks)) continue;
    facts.push_back(&f);
    if (f.disclosure != DisclosurePolicy::Volunteered && is_undisclosed_gated(st, f.id))
      ++fresh_gated;
  }
  for (const auto& f : s.red_flags) {
    if (!f.probes.any(toks)) continue;
    flags.push_back(&f);
    if (is_undisclosed_gated(st, f.id)) ++fresh_gated;
  }
  const bool compound = fresh_gated >= 2;

  for (const Fact* f : facts) {
    bool already = st.disclosed.count(f->id) > 0;
    if (already && !asked) continue;
    if (!already && compound && f->omit_on_compound) {
      out.withheld.push_back(f->id);
      continue;
    }
    if (!already && f->disclosure == DisclosurePolicy::OnActiveProbe) {
      // Needs persistence: the first probing turn only gets a hedge.
      if (++st.probe_turns[f->id] < 2) {
        out.hedged.push_back(f->id);
        continue;
      }
    }
    st.disclosed.insert(f->id);
    out.disclosed.push_back({f->id, f->statement, false});
  }
  for (const RedFlag* f : flags) {
    if (st.disclosed.count(f->id) && !asked) continue;
    st.disclosed.insert(f->id);
    out.disclosed.push_back({f->id, f->statement, true});
  }
  return out;
}

std::optional<double> parse_duration_s(std::string_view instruction) {
  auto toks = text::tokenize(instruction);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i] == "half" && i + 2 < toks.size() && toks[i + 1] == "a" &&
        unit_seconds(toks[i + 2]) == 60.0)
      return 30.0;
    auto n = number_word(toks[i]);
    if (!n || i + 1 >= toks.size()) continue;
    // "twenty five seconds"
    if (i + 2 < toks.size() && *n >= 20 && std::fmod(*n, 10.0) == 0) {
      if (auto m = number_word(toks[i + 1]); m && *m < 10) {
        if (auto u = unit_seconds(toks[i + 2])) return (*n + *m) * *u;
      }
    }
    if (auto u = unit_seconds(toks[i + 1])) return *n * *u;
  }
  return std::nullopt;
}

ManeuverOutcome execute_maneuver(std::string_view instruction, std::string_view maneuver_id,
                                 PatientState& st) {
  const Maneuver* m = st.scenario->find_maneuver(maneuver_id);
  if (!m) throw Error(ErrorCode::UnknownManeuver, "unknown maneuver '" + std::string(maneuver_id) + "'");
  auto toks = text::tokenize(instruction);
  if (st.scenario->impossible_instructions.any(toks)) return IncorrectExecution{m->id};
  for (const auto& e : m->elements)
    if (!e.matches(toks)) return ClarificationRequest{m->id};

  auto stated = parse_duration_s(instruction);
  ManeuverPerformed done{m->id, stated.value_or(static_cast<double>(m->brief_hold_s)), {}};
  bool long_enough = !m->min_duration_s || (stated && *stated >= *m->min_duration_s);
  if (long_enough) {
    done.finding = m->scripted_finding;
    st.elicited.insert(m->scripted_finding.id);
  }
  return done;
}

const Maneuver* detect_maneuver(std::string_view utterance, const ScenarioScript& script) {
  auto toks = text::tokenize(utterance);
  const Maneuver* best = nullptr;
  std::size_t best_hits = 0;
  for (const auto& m : script.maneuvers) {
    if (!m.cues.any(toks)) continue;
    std::size_t hits = 0;
    for (const auto& e : m.elements) hits += e.matches(toks) ? 1 : 0;
    if (!best || hits > best_hits) {
      best = &m;
      best_hits = hits;
    }
  }
  return best;
}

std::vector<const UnevokedSign*> visible_state(const ScenarioScript& script, std::int64_t t_ms) {
  if (t_ms < 0) throw Error(ErrorCode::InvalidArgument, "visible_state: negative time");
  std::vector<const UnevokedSign*> out;
  for (const auto& sign : script.unevoked_signs)
    if (sign.start_ms <= t_ms && t_ms <= sign.end_ms) out.push_back(&sign);
  return out;
}

std::vector<std::string> extract_findings(std::string_view text, const ScenarioScript& script) {
  auto toks = text::tokenize(text);
  std::vector<std::string> out;
  for (const auto& f : script.facts)
    if (f.evidence.any(toks)) out.push_back(f.id);
  for (const auto& f : script.red_flags)
    if (f.evidence.any(toks)) out.push_back(f.id);
  return out;
}

PatientReply actor_reply(std::string_view talker_utterance, PatientState& st) {
  const auto& s = *st.scenario;
  PatientReply reply;
  std::vector<std::string> parts;
  Json findings = Json::array();

  if (st.replies == 0) {
    // Front-load the chief concern and everything the patient would offer.
    parts.push_back(s.chief_concern);
    for (const auto& f : s.facts) {
      if (f.disclosure != DisclosurePolicy::Volunteered) continue;
      st.disclosed.insert(f.id);
      reply.probes.disclosed.push_back({f.id, f.statement, false});
    }
    auto more = match_probe(talker_utterance, st);
    for (auto& d : more.disclosed)
      if (std::find(reply.probes.disclosed.begin(), reply.probes.disclosed.end(), d) ==
          reply.probes.disclosed.end())
        reply.probes.disclosed.push_back(std::move(d));
    reply.probes.hedged = std::move(more.hedged);
    reply.probes.withheld = std::move(more.withheld);
  } else {
    reply.probes = match_probe(talker_utterance, st);
  }
  for (const auto& d : reply.probes.disclosed) {
    parts.push_back(d.statement);
    findings.push_back(d.finding);
  }
  if (!reply.probes.hedged.empty()) parts.push_back(kHedge);
  if (parts.empty())
    parts.push_back(talker_utterance.find('?') != std::string_view::npos ? kNothing : kOkay);

  ++st.replies;
  for (const auto& q : s.patient_questions)
    if (q.at_turn == st.replies) parts.push_back(q.text);

  std::string text;
  for (const auto& p : parts) {
    if (!text.empty()) text += ' ';
    text += p;
  }
  reply.payload = Json{{"text", text}, {"end_of_turn", true}, {"findings", findings}};
  return reply;
}

PatientResponse respond(std::string_view talker_utterance, PatientState& st) {
  PatientResponse out;
  const Maneuver* m = st.replies > 0 ? detect_maneuver(talker_utterance, *st.scenario) : nullptr;
  if (!m) {
    out.utterance = actor_reply(talker_utterance, st).payload;
    return out;
  }

  std::string said;
  auto outcome = execute_maneuver(talker_utterance, m->id, st);
  if (const auto* done = std::get_if<ManeuverPerformed>(&outcome)) {
    Json marker{{"maneuver", m->id}, {"duration_s", done->held_s}, {"outcome", "performed"},
                {"findings", Json::array()}};
    if (done->finding) {
      marker["findings"].push_back(done->finding->id);
      said = done->finding->statement;
    } else {
      said = kBriefHold;
    }
    out.marker = std::move(marker);
  } else if (std::holds_alternative<IncorrectExecution>(outcome)) {
    out.marker = Json{{"maneuver", m->id}, {"duration_s", 0}, {"outcome", "incorrect"},
                      {"findings", Json::array()}};
    said = kIncorrect;
  } else {
    said = kClarify;
  }

  // A guided maneuver can still carry a question; answer that too.
  auto reply = actor_reply(talker_utterance, st);
  auto findings = reply.payload["findings"];
  std::string text = said;
  if (!findings.empty()) text += ' ' + reply.payload["text"].get<std::string>();
  else
    for (const auto& q : st.scenario->patient_questions)
      if (q.at_turn == st.replies) text += ' ' + q.text;
  out.utterance = Json{{"text", text}, {"end_of_turn", true}, {"findings", findings}};
  return out;
}

}  // namespace telesim::patient
