#include "telesim/trace/audit.hpp"

#include <set>
#include <sstream>

namespace telesim::trace {

using session::EventFrame;
using session::EvidenceSource;
using session::FrameKind;

namespace {

bool carries(const EventFrame& f, const std::string& finding) {
  for (const auto& x : session::payload_findings(f))
    if (x == finding) return true;
  if (f.kind == FrameKind::FrameObservation)
    for (const auto& s : f.payload.at("signs"))
      if (s == finding) return true;
  return false;
}

// Empty when supported, otherwise why not.
std::string check(const session::Cite& c, const EventFrame& chunk, const EncounterTrace& trace) {
  if (c.source == EvidenceSource::Inferred) return "inferred, not observed or reported";
  if (!c.frame) return "no supporting frame";
  if (*c.frame >= chunk.seq) return "supporting frame does not precede the assertion";
  const EventFrame* f = trace.find(*c.frame);
  if (!f) return "supporting frame not in trace";
  bool kind_ok = c.source == EvidenceSource::PatientReported
                     ? f->kind == FrameKind::PatientUtterance
                     : f->kind == FrameKind::FrameObservation || f->kind == FrameKind::ManeuverMarker;
  if (!kind_ok) return "supporting frame has the wrong kind for its source";
  if (!carries(*f, c.finding)) return "supporting frame does not evidence the finding";
  return {};
}

}  // namespace

std::string assertion_id(std::uint64_t seq) { return "chunk-" + std::to_string(seq); }

std::vector<EvidenceTag> evidence_tags(const EncounterTrace& trace) {
  std::vector<EvidenceTag> out;
  for (const auto& f : trace.frames()) {
    if (f.kind != FrameKind::TalkerUtteranceChunk) continue;
    for (const auto& c : session::cites_of(f)) out.push_back({assertion_id(f.seq), c.finding, c.source, c.frame});
  }
  return out;
}

AuditReport audit(const EncounterTrace& trace) {
  AuditReport r;
  for (auto s : {EvidenceSource::Observed, EvidenceSource::PatientReported, EvidenceSource::Inferred})
    r.counts[std::string(session::to_string(s))] = 0;

  std::set<std::int64_t> utterances, tagged;
  for (const auto& f : trace.frames()) {
    if (f.kind != FrameKind::TalkerUtteranceChunk) continue;
    auto u = session::chunk_utterance(f).value_or(-1);
    utterances.insert(u);
    auto cites = session::cites_of(f);
    if (cites.empty()) continue;
    tagged.insert(u);
    ++r.assertions;
    std::optional<ContextualCompletion> flag;
    for (const auto& c : cites) {
      ++r.counts[std::string(session::to_string(c.source))];
      if (flag) continue;
      auto why = check(c, f, trace);
      if (!why.empty()) flag = ContextualCompletion{assertion_id(f.seq), f.seq, session::payload_text(f), c.finding, why};
    }
    if (flag) r.contextual_completions.push_back(std::move(*flag));
  }
  r.untagged_utterances = utterances.size() - tagged.size();
  return r;
}

Json to_json(const AuditReport& report) {
  Json flags = Json::array();
  for (const auto& c : report.contextual_completions)
    flags.push_back({{"assertion_id", c.assertion_id}, {"seq", c.seq}, {"quoted_text", c.quoted_text},
                     {"finding", c.finding}, {"reason", c.reason}});
  return Json{{"contextual_completions", flags}, {"counts", report.counts},
              {"assertions", report.assertions}, {"untagged_utterances", report.untagged_utterances}};
}

std::string to_table(const AuditReport& report) {
  std::ostringstream os;
  os << "assertions: " << report.assertions << "  untagged utterances: " << report.untagged_utterances << "\n";
  for (const auto& [k, v] : report.counts) os << "  " << k << ": " << v << "\n";
  os << "contextual completions: " << report.contextual_completions.size() << "\n";
  for (const auto& c : report.contextual_completions)
    os << "  " << c.assertion_id << "  [" << c.finding << "] " << c.reason << "\n    \"" << c.quoted_text << "\"\n";
  return os.str();
}

}  // namespace telesim::trace
