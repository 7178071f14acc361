#include "telesim/session/frame.hpp"

#include <array>

#include "telesim/common/error.hpp"

namespace telesim::session {

namespace {

constexpr std::array<std::string_view, kFrameKindCount> kKindNames = {
    "PatientUtterance", "TalkerUtteranceChunk", "BargeIn",
    "FrameCaptureRequest", "FrameObservation", "DirectiveInjected",
    "ManeuverMarker", "GoalStateChange", "SessionControl"};

[[noreturn]] void malformed(FrameKind kind, const std::string& what) {
  throw Error(ErrorCode::MalformedPayload,
              "malformed payload for " + std::string(to_string(kind)) + ": " + what);
}

void require_string(FrameKind kind, const Json& p, const char* key) {
  if (!p.contains(key) || !p.at(key).is_string()) malformed(kind, std::string("'") + key + "' must be a string");
}

void optional_bool(FrameKind kind, const Json& p, const char* key) {
  if (p.contains(key) && !p.at(key).is_boolean()) malformed(kind, std::string("'") + key + "' must be a boolean");
}

void optional_string(FrameKind kind, const Json& p, const char* key) {
  if (p.contains(key) && !p.at(key).is_string()) malformed(kind, std::string("'") + key + "' must be a string");
}

void optional_string_array(FrameKind kind, const Json& p, const char* key) {
  if (!p.contains(key)) return;
  const auto& a = p.at(key);
  if (!a.is_array()) malformed(kind, std::string("'") + key + "' must be an array");
  for (const auto& e : a) {
    if (!e.is_string()) malformed(kind, std::string("'") + key + "' must hold strings");
  }
}

void optional_nonneg_int(FrameKind kind, const Json& p, const char* key) {
  if (!p.contains(key)) return;
  const auto& v = p.at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    malformed(kind, std::string("'") + key + "' must be a non-negative integer");
  }
}

}  // namespace

std::string_view to_string(FrameKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<FrameKind> parse_frame_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<FrameKind>(i);
  }
  return std::nullopt;
}

std::string_view to_string(EvidenceSource source) {
  switch (source) {
    case EvidenceSource::Observed: return "observed";
    case EvidenceSource::PatientReported: return "patient-reported";
    case EvidenceSource::Inferred: return "inferred";
  }
  return "inferred";
}

std::optional<EvidenceSource> parse_evidence_source(std::string_view name) {
  if (name == "observed") return EvidenceSource::Observed;
  if (name == "patient-reported") return EvidenceSource::PatientReported;
  if (name == "inferred") return EvidenceSource::Inferred;
  return std::nullopt;
}

Json to_json(const Cite& cite) {
  Json j = {{"finding", cite.finding}, {"source", to_string(cite.source)}};
  if (cite.frame) j["frame"] = *cite.frame;
  return j;
}

Cite cite_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("finding") || !j.at("finding").is_string() ||
      !j.contains("source") || !j.at("source").is_string()) {
    throw Error(ErrorCode::MalformedPayload, "cite needs string 'finding' and 'source'");
  }
  auto source = parse_evidence_source(j.at("source").get<std::string>());
  if (!source) throw Error(ErrorCode::MalformedPayload, "cite has unknown source class");
  Cite c{j.at("finding").get<std::string>(), *source, std::nullopt};
  if (j.contains("frame")) {
    const auto& fr = j.at("frame");
    if (!fr.is_number_integer() || (!fr.is_number_unsigned() && fr.get<std::int64_t>() < 0)) {
      throw Error(ErrorCode::MalformedPayload, "cite 'frame' must be a non-negative integer");
    }
    c.frame = j.at("frame").get<std::uint64_t>();
  }
  return c;
}

std::vector<Cite> cites_of(const EventFrame& frame) {
  std::vector<Cite> out;
  if (frame.kind != FrameKind::TalkerUtteranceChunk || !frame.payload.contains("cites")) return out;
  for (const auto& c : frame.payload.at("cites")) out.push_back(cite_from_json(c));
  return out;
}

void validate_payload(FrameKind kind, const Json& p) {
  if (!p.is_object()) malformed(kind, "payload must be an object");
  switch (kind) {
    case FrameKind::PatientUtterance:
      require_string(kind, p, "text");
      optional_bool(kind, p, "end_of_turn");
      optional_string_array(kind, p, "findings");
      break;
    case FrameKind::TalkerUtteranceChunk:
      require_string(kind, p, "text");
      if (!p.contains("utterance")) malformed(kind, "'utterance' is required");
      optional_nonneg_int(kind, p, "utterance");
      optional_bool(kind, p, "final");
      optional_string(kind, p, "directive");
      if (p.contains("cites")) {
        if (!p.at("cites").is_array()) malformed(kind, "'cites' must be an array");
        for (const auto& c : p.at("cites")) cite_from_json(c);
      }
      break;
    case FrameKind::BargeIn:
    case FrameKind::FrameCaptureRequest:
      break;
    case FrameKind::FrameObservation:
      if (!p.contains("signs")) malformed(kind, "'signs' is required");
      optional_string_array(kind, p, "signs");
      optional_string_array(kind, p, "findings");
      optional_nonneg_int(kind, p, "request");
      break;
    case FrameKind::DirectiveInjected:
      require_string(kind, p, "goal_id");
      require_string(kind, p, "goal_kind");
      require_string(kind, p, "instruction");
      if (!p.contains("priority") || !p.at("priority").is_number_integer()) {
        malformed(kind, "'priority' must be an integer");
      }
      break;
    case FrameKind::ManeuverMarker:
      require_string(kind, p, "maneuver");
      if (p.contains("duration_s") && (!p.at("duration_s").is_number() || p.at("duration_s").get<double>() < 0)) {
        malformed(kind, "'duration_s' must be a non-negative number");
      }
      optional_string_array(kind, p, "findings");
      optional_string(kind, p, "outcome");
      break;
    case FrameKind::GoalStateChange:
      require_string(kind, p, "goal_id");
      require_string(kind, p, "from");
      require_string(kind, p, "to");
      break;
    case FrameKind::SessionControl:
      require_string(kind, p, "action");
      break;
  }
}

Json to_json(const EventFrame& frame) {
  Json j = {{"seq", frame.seq},
            {"ts_ms", frame.ts_ms},
            {"kind", to_string(frame.kind)},
            {"payload", frame.payload}};
  if (frame.truncated) j["truncated"] = true;
  return j;
}

EventFrame frame_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::MalformedPayload, "frame must be a JSON object");
  if (!j.contains("seq") || !j.at("seq").is_number_integer() ||
      (!j.at("seq").is_number_unsigned() && j.at("seq").get<std::int64_t>() < 0)) {
    throw Error(ErrorCode::MalformedPayload, "frame 'seq' must be a non-negative integer");
  }
  if (!j.contains("ts_ms") || !j.at("ts_ms").is_number_integer()) {
    throw Error(ErrorCode::MalformedPayload, "frame 'ts_ms' must be an integer");
  }
  if (!j.contains("kind") || !j.at("kind").is_string()) {
    throw Error(ErrorCode::MalformedPayload, "frame 'kind' must be a string");
  }
  auto kind = parse_frame_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::MalformedPayload, "unknown frame kind '" + j.at("kind").get<std::string>() + "'");
  EventFrame f;
  f.seq = j.at("seq").get<std::uint64_t>();
  f.ts_ms = j.at("ts_ms").get<std::int64_t>();
  f.kind = *kind;
  f.payload = j.contains("payload") ? j.at("payload") : Json::object();
  validate_payload(f.kind, f.payload);
  if (j.contains("truncated")) {
    if (!j.at("truncated").is_boolean()) throw Error(ErrorCode::MalformedPayload, "'truncated' must be a boolean");
    f.truncated = j.at("truncated").get<bool>();
  }
  if (f.truncated && f.kind != FrameKind::TalkerUtteranceChunk) {
    throw Error(ErrorCode::MalformedPayload, "'truncated' is only valid on TalkerUtteranceChunk");
  }
  return f;
}

std::string payload_text(const EventFrame& frame) {
  if (frame.payload.contains("text") && frame.payload.at("text").is_string()) {
    return frame.payload.at("text").get<std::string>();
  }
  return {};
}

std::vector<std::string> payload_findings(const EventFrame& frame) {
  std::vector<std::string> out;
  if (!frame.payload.contains("findings")) return out;
  for (const auto& f : frame.payload.at("findings")) {
    if (f.is_string()) out.push_back(f.get<std::string>());
  }
  return out;
}

bool is_final_chunk(const EventFrame& frame) {
  return frame.kind == FrameKind::TalkerUtteranceChunk && frame.payload.value("final", false);
}

bool is_patient_turn_end(const EventFrame& frame) {
  return frame.kind == FrameKind::PatientUtterance && frame.payload.value("end_of_turn", false);
}

std::optional<std::int64_t> chunk_utterance(const EventFrame& frame) {
  if (frame.kind != FrameKind::TalkerUtteranceChunk || !frame.payload.contains("utterance")) return std::nullopt;
  return frame.payload.at("utterance").get<std::int64_t>();
}

std::string control_action(const EventFrame& frame) {
  if (frame.kind != FrameKind::SessionControl) return {};
  return frame.payload.value("action", std::string{});
}

}  // namespace telesim::session
