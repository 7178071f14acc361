#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "telesim/common/arm.hpp"
#include "telesim/session/clock.hpp"
#include "telesim/session/frame.hpp"
#include "telesim/session/turn_state.hpp"
#include "telesim/trace/trace.hpp"

namespace telesim::session {

struct SessionId {
  std::string value;

  auto operator<=>(const SessionId&) const = default;
};

struct SessionConfig {
  std::string scenario_id;
  Arm arm = Arm::Coclinician;
  std::int64_t max_duration_ms = 20 * 60 * 1000;
  std::uint32_t barge_in_grace = 1;
  std::string actor_id;
};

struct TruncationRecord {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t marked_truncated = 0;
};

/// One encounter's append-only log. All writers serialize through one mutex
/// (the single append point); readers get copies of a consistent prefix.
class Session {
 public:
  Session(SessionId id, std::shared_ptr<const Clock> clock);

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const SessionId& id() const noexcept { return id_; }

  /// Registers the config, zeroes the clock and empties the log. Throws
  /// DuplicateOpen if this handle was already opened.
  void open(const SessionConfig& config);

  /// Appends a frame and advances the turn state. Returns the assigned seq.
  /// Talker chunks of an utterance cut by a barge-in are rejected with
  /// ChunkRejected once the grace budget is spent.
  std::uint64_t submit(FrameKind kind, Json payload);

  /// Resolves the pending barge-in: accepts at most the remaining grace
  /// budget of `in_flight` talker chunks and rejects the rest.
  TruncationRecord apply_barge_in(std::span<const Json> in_flight);

  /// Frames produced off the talker's critical path (planner output). They
  /// are appended immediately at a turn boundary, otherwise held until the
  /// open talker utterance ends.
  void post_at_turn_boundary(std::vector<FrameBody> frames);

  trace::EncounterTrace close();

  /// Talker utterance ids are handed out by the session so that chunk
  /// streams from concurrent producers stay distinguishable.
  std::int64_t next_utterance_id();

  std::vector<EventFrame> frames_since(std::uint64_t seq) const;
  std::size_t size() const;
  TurnState turn_state() const;
  bool pending_truncation() const;
  bool is_open() const;
  bool is_closed() const;
  const SessionConfig& config() const { return config_; }
  std::int64_t elapsed_ms() const;

  /// Blocks until the log holds more than `seq_count` frames, the session
  /// closes, or the timeout passes. Returns the current size.
  std::size_t wait_for_frames(std::size_t seq_count, std::chrono::milliseconds timeout) const;

 private:
  enum class State { Fresh, Open, Closed };

  struct TruncationWindow {
    std::int64_t utterance = -1;
    std::uint32_t remaining = 0;
  };

  std::uint64_t append_locked(FrameKind kind, Json payload, bool truncated);
  std::uint64_t submit_locked(FrameKind kind, Json payload);
  void resolve_truncation_locked();
  void flush_deferred_locked();
  bool at_boundary_locked() const;
  bool check_timeout_locked();
  std::int64_t elapsed_locked() const;

  SessionId id_;
  std::shared_ptr<const Clock> clock_;
  SessionConfig config_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  State state_ = State::Fresh;
  std::int64_t opened_at_ = 0;
  std::vector<EventFrame> log_;
  TurnState turn_;
  std::optional<std::int64_t> open_utterance_;
  std::optional<TruncationWindow> truncation_;
  std::set<std::int64_t> truncated_utterances_;
  std::vector<FrameBody> deferred_;
  std::int64_t next_utterance_ = 0;
};

/// Process-wide table of sessions.
class SessionRegistry {
 public:
  using ScenarioResolver = std::function<bool(const std::string&)>;

  SessionRegistry(ScenarioResolver resolver, std::shared_ptr<const Clock> clock);

  SessionId open_session(const SessionConfig& config);
  std::uint64_t submit_frame(const SessionId& id, FrameKind kind, Json payload);
  TruncationRecord apply_barge_in(const SessionId& id, std::span<const Json> in_flight);
  trace::EncounterTrace close_session(const SessionId& id);

  /// Throws UnknownSession.
  std::shared_ptr<Session> get(const SessionId& id) const;
  std::vector<SessionId> ids() const;

 private:
  ScenarioResolver resolver_;
  std::shared_ptr<const Clock> clock_;
  mutable std::mutex mu_;
  std::map<SessionId, std::shared_ptr<Session>> sessions_;
};

SessionId make_session_id();

}  // namespace telesim::session
