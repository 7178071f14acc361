#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace telesim {

enum class ErrorCode {
  InvalidArgument,
  UnknownScenario,
  DuplicateOpen,
  UnknownSession,
  ClosedSession,
  DoubleClose,
  MalformedPayload,
  NoPendingTruncation,
  ChunkRejected,
  SessionTimeout,
  Backend,
  Transport,
  Parse,
  Validation,
  SchemaMismatch,
  CorruptRecord,
  NonContiguousDelta,
  DuplicateGoal,
  NotManeuverGoal,
  UnknownManeuver,
  ScenarioMismatch,
  IncompleteSheet,
  OutOfRange,
  UnknownItem,
  MissingItems,
  RankDeficient,
  EmptyInput,
  UnknownArm,
  LengthMismatch,
  TauUndefined,
  MissingArm,
  ReplicationViolated,
  InfeasibleReplication,
  InsufficientData,
  StudyAborted,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Carries the itemized list of violations found while validating a document.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations);

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// Failure while reading a line-oriented record stream; index is 0-based and
// counts the header record.
class RecordError : public Error {
 public:
  RecordError(ErrorCode code, std::size_t index, const std::string& detail);

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace telesim
