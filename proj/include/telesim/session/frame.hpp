#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "telesim/common/json.hpp"

namespace telesim::session {

enum class FrameKind {
  PatientUtterance,
  TalkerUtteranceChunk,
  BargeIn,
  FrameCaptureRequest,
  FrameObservation,
  DirectiveInjected,
  ManeuverMarker,
  GoalStateChange,
  SessionControl,
};

inline constexpr std::size_t kFrameKindCount = 9;

std::string_view to_string(FrameKind kind);
std::optional<FrameKind> parse_frame_kind(std::string_view name);

/// One entry of the session log. `payload` is the kind-specific body; its
/// shape is checked by validate_payload().
struct EventFrame {
  std::uint64_t seq = 0;
  std::int64_t ts_ms = 0;
  FrameKind kind = FrameKind::SessionControl;
  Json payload = Json::object();
  bool truncated = false;

  bool operator==(const EventFrame&) const = default;
};

/// A frame before the session assigns seq and timestamp.
struct FrameBody {
  FrameKind kind;
  Json payload;
};

/// Where a cited finding came from.
enum class EvidenceSource { Observed, PatientReported, Inferred };

std::string_view to_string(EvidenceSource source);
std::optional<EvidenceSource> parse_evidence_source(std::string_view name);

/// An evidence reference carried by a talker chunk.
struct Cite {
  std::string finding;
  EvidenceSource source = EvidenceSource::Inferred;
  std::optional<std::uint64_t> frame;

  bool operator==(const Cite&) const = default;
};

Json to_json(const Cite& cite);
Cite cite_from_json(const Json& j);
std::vector<Cite> cites_of(const EventFrame& frame);

/// Throws Error(MalformedPayload) when the payload does not fit the kind.
void validate_payload(FrameKind kind, const Json& payload);

/// Wire form: {"seq", "ts_ms", "kind", "payload", "truncated"?}.
Json to_json(const EventFrame& frame);
EventFrame frame_from_json(const Json& j);

// Payload accessors shared by several modules.
std::string payload_text(const EventFrame& frame);
std::vector<std::string> payload_findings(const EventFrame& frame);
bool is_final_chunk(const EventFrame& frame);
bool is_patient_turn_end(const EventFrame& frame);
std::optional<std::int64_t> chunk_utterance(const EventFrame& frame);
std::string control_action(const EventFrame& frame);

}  // namespace telesim::session
