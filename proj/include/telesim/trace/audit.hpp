#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "telesim/common/json.hpp"
#include "telesim/session/frame.hpp"
#include "telesim/trace/trace.hpp"

namespace telesim::trace {

/// One cite of one assertion, with its resolved support.
struct EvidenceTag {
  std::string assertion_id;
  std::string finding;
  session::EvidenceSource source = session::EvidenceSource::Inferred;
  std::optional<std::uint64_t> supporting_frame;
};

struct ContextualCompletion {
  std::string assertion_id;
  std::uint64_t seq = 0;
  std::string quoted_text;
  std::string finding;
  std::string reason;
};

struct AuditReport {
  std::vector<ContextualCompletion> contextual_completions;
  std::map<std::string, std::size_t> counts;  // cites per source class
  std::size_t assertions = 0;
  std::size_t untagged_utterances = 0;        // talker utterances without any cite
};

/// Assertion id of a talker chunk: "chunk-<seq>".
std::string assertion_id(std::uint64_t seq);

/// Flags every cited talker chunk whose cites include a finding without an
/// earlier observed (FrameObservation / ManeuverMarker) or patient-reported
/// (PatientUtterance) frame that actually carries it. Inferred cites have no
/// supporting frame by definition and are always flagged.
AuditReport audit(const EncounterTrace& trace);

std::vector<EvidenceTag> evidence_tags(const EncounterTrace& trace);

Json to_json(const AuditReport& report);
std::string to_table(const AuditReport& report);

}  // namespace telesim::trace
