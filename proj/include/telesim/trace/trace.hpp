#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "telesim/common/arm.hpp"
#include "telesim/session/frame.hpp"

namespace telesim::trace {

inline constexpr int kTraceSchemaVersion = 1;
inline constexpr std::string_view kTraceExtension = ".trace.jsonl";

struct TraceMetadata {
  std::string scenario;
  Arm arm = Arm::Coclinician;
  std::string actor;
  std::int64_t started_at_ms = 0;
  std::string session;

  bool operator==(const TraceMetadata&) const = default;
};

/// An ordered, validated session log plus its metadata. Construction checks
/// the session-log invariants, so any EncounterTrace in hand is well ordered.
class EncounterTrace {
 public:
  EncounterTrace() = default;
  EncounterTrace(TraceMetadata metadata, std::vector<session::EventFrame> frames);

  const TraceMetadata& metadata() const noexcept { return metadata_; }
  const std::vector<session::EventFrame>& frames() const noexcept { return frames_; }
  std::size_t size() const noexcept { return frames_.size(); }
  bool empty() const noexcept { return frames_.empty(); }

  /// Frame with the given seq, or nullptr.
  const session::EventFrame* find(std::uint64_t seq) const noexcept;

  /// Recorded duration: timestamp of the last frame (0 when empty).
  std::int64_t duration_ms() const noexcept;

  bool operator==(const EncounterTrace&) const = default;

 private:
  TraceMetadata metadata_;
  std::vector<session::EventFrame> frames_;
};

/// Throws Error(Validation) when frames break the log invariants: strictly
/// increasing seq, non-decreasing timestamps, truncated only on talker chunks,
/// well-formed payloads.
void validate_frames(const std::vector<session::EventFrame>& frames);

Json header_json(const TraceMetadata& metadata);

/// Newline-delimited JSON: header record first, then one frame per line.
std::string export_trace(const EncounterTrace& trace);
EncounterTrace import_trace(std::string_view bytes);
EncounterTrace import_trace(std::istream& in);

void write_trace_file(const EncounterTrace& trace, const std::filesystem::path& path);
EncounterTrace read_trace_file(const std::filesystem::path& path);

}  // namespace telesim::trace
