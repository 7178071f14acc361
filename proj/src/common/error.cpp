#include "telesim/common/error.hpp"

namespace telesim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::UnknownScenario: return "unknown scenario";
    case ErrorCode::DuplicateOpen: return "duplicate open";
    case ErrorCode::UnknownSession: return "unknown session";
    case ErrorCode::ClosedSession: return "closed session";
    case ErrorCode::DoubleClose: return "double close";
    case ErrorCode::MalformedPayload: return "malformed payload";
    case ErrorCode::NoPendingTruncation: return "no pending truncation";
    case ErrorCode::ChunkRejected: return "chunk rejected";
    case ErrorCode::SessionTimeout: return "session timeout";
    case ErrorCode::Backend: return "backend error";
    case ErrorCode::Transport: return "transport error";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::Validation: return "validation error";
    case ErrorCode::SchemaMismatch: return "schema mismatch";
    case ErrorCode::CorruptRecord: return "corrupt record";
    case ErrorCode::NonContiguousDelta: return "non-contiguous frame delta";
    case ErrorCode::DuplicateGoal: return "duplicate goal id";
    case ErrorCode::NotManeuverGoal: return "not a maneuver goal";
    case ErrorCode::UnknownManeuver: return "unknown maneuver";
    case ErrorCode::ScenarioMismatch: return "scenario mismatch";
    case ErrorCode::IncompleteSheet: return "incomplete sheet";
    case ErrorCode::OutOfRange: return "out of range";
    case ErrorCode::UnknownItem: return "unknown item";
    case ErrorCode::MissingItems: return "missing items";
    case ErrorCode::RankDeficient: return "rank deficient design";
    case ErrorCode::EmptyInput: return "empty input";
    case ErrorCode::UnknownArm: return "unknown arm";
    case ErrorCode::LengthMismatch: return "length mismatch";
    case ErrorCode::TauUndefined: return "tau undefined";
    case ErrorCode::MissingArm: return "missing arm";
    case ErrorCode::ReplicationViolated: return "replication structure violated";
    case ErrorCode::InfeasibleReplication: return "infeasible replication spec";
    case ErrorCode::InsufficientData: return "insufficient data";
    case ErrorCode::StudyAborted: return "study aborted";
  }
  return "unknown error";
}

namespace {

std::string join_violations(const std::vector<std::string>& violations) {
  std::string out = "validation failed:";
  for (const auto& v : violations) {
    out += "\n  - ";
    out += v;
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error(ErrorCode::Validation, join_violations(violations)),
      violations_(std::move(violations)) {}

RecordError::RecordError(ErrorCode code, std::size_t index, const std::string& detail)
    : Error(code, "record " + std::to_string(index) + ": " + detail), index_(index) {}

}  // namespace telesim
