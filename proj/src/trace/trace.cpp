#include "telesim/trace/trace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "telesim/common/error.hpp"

namespace telesim::trace {

using session::EventFrame;
using session::FrameKind;

void validate_frames(const std::vector<EventFrame>& frames) {
  std::vector<std::string> violations;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (i > 0) {
      if (f.seq <= frames[i - 1].seq) {
        violations.push_back("frame " + std::to_string(i) + ": seq " + std::to_string(f.seq) +
                             " not greater than previous " + std::to_string(frames[i - 1].seq));
      }
      if (f.ts_ms < frames[i - 1].ts_ms) {
        violations.push_back("frame " + std::to_string(i) + ": timestamp decreases");
      }
    }
    if (f.ts_ms < 0) violations.push_back("frame " + std::to_string(i) + ": negative timestamp");
    if (f.truncated && f.kind != FrameKind::TalkerUtteranceChunk) {
      violations.push_back("frame " + std::to_string(i) + ": truncated set on " + std::string(to_string(f.kind)));
    }
    try {
      session::validate_payload(f.kind, f.payload);
    } catch (const Error& e) {
      violations.push_back("frame " + std::to_string(i) + ": " + e.what());
    }
  }
  if (!violations.empty()) throw ValidationError(std::move(violations));
}

EncounterTrace::EncounterTrace(TraceMetadata metadata, std::vector<EventFrame> frames)
    : metadata_(std::move(metadata)), frames_(std::move(frames)) {
  validate_frames(frames_);
}

const EventFrame* EncounterTrace::find(std::uint64_t seq) const noexcept {
  // seq is strictly increasing, so binary search applies.
  auto it = std::lower_bound(frames_.begin(), frames_.end(), seq,
                             [](const EventFrame& f, std::uint64_t s) { return f.seq < s; });
  if (it == frames_.end() || it->seq != seq) return nullptr;
  return &*it;
}

std::int64_t EncounterTrace::duration_ms() const noexcept {
  return frames_.empty() ? 0 : frames_.back().ts_ms;
}

Json header_json(const TraceMetadata& m) {
  Json h = {{"schema", kTraceSchemaVersion},
            {"scenario", m.scenario},
            {"arm", to_string(m.arm)},
            {"actor", m.actor},
            {"started_at", m.started_at_ms}};
  if (!m.session.empty()) h["session"] = m.session;
  return h;
}

std::string export_trace(const EncounterTrace& trace) {
  std::string out = header_json(trace.metadata()).dump();
  out.push_back('\n');
  for (const auto& f : trace.frames()) {
    out += session::to_json(f).dump();
    out.push_back('\n');
  }
  return out;
}

namespace {

TraceMetadata parse_header(const std::string& line) {
  Json h;
  try {
    h = Json::parse(line);
  } catch (const Json::exception& e) {
    throw RecordError(ErrorCode::CorruptRecord, 0, std::string("header is not valid JSON: ") + e.what());
  }
  if (!h.is_object() || !h.contains("schema")) {
    throw RecordError(ErrorCode::CorruptRecord, 0, "header lacks 'schema'");
  }
  if (!h.at("schema").is_number_integer() || h.at("schema").get<int>() != kTraceSchemaVersion) {
    throw Error(ErrorCode::SchemaMismatch,
                "trace schema " + h.at("schema").dump() + " is not supported (expected " +
                    std::to_string(kTraceSchemaVersion) + ")");
  }
  try {
    TraceMetadata m;
    m.scenario = h.at("scenario").get<std::string>();
    m.arm = arm_from_string(h.at("arm").get<std::string>());
    m.actor = h.at("actor").get<std::string>();
    m.started_at_ms = h.value("started_at", std::int64_t{0});
    m.session = h.value("session", std::string{});
    return m;
  } catch (const Json::exception& e) {
    throw RecordError(ErrorCode::CorruptRecord, 0, std::string("bad header field: ") + e.what());
  } catch (const Error& e) {
    throw RecordError(ErrorCode::CorruptRecord, 0, e.what());
  }
}

}  // namespace

EncounterTrace import_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.empty()) {
    throw RecordError(ErrorCode::CorruptRecord, 0, "missing header record");
  }
  auto metadata = parse_header(line);
  std::vector<EventFrame> frames;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    ++index;
    if (line.empty()) {
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw RecordError(ErrorCode::CorruptRecord, index, "empty record");
    }
    try {
      frames.push_back(session::frame_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw RecordError(ErrorCode::CorruptRecord, index, e.what());
    } catch (const Error& e) {
      throw RecordError(ErrorCode::CorruptRecord, index, e.what());
    }
  }
  try {
    return EncounterTrace(std::move(metadata), std::move(frames));
  } catch (const ValidationError& e) {
    throw RecordError(ErrorCode::CorruptRecord, index, e.what());
  }
}

EncounterTrace import_trace(std::string_view bytes) {
  std::istringstream in{std::string(bytes)};
  return import_trace(in);
}

void write_trace_file(const EncounterTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << export_trace(trace);
}

EncounterTrace read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path.string());
  return import_trace(in);
}

}  // namespace telesim::trace
