#include "telesim/session/session.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>

#include "telesim/common/error.hpp"

namespace telesim::session {

SessionId make_session_id() {
  static std::atomic<std::uint64_t> counter{0};
  char buf[32];
  std::snprintf(buf, sizeof buf, "session-%06llu",
                static_cast<unsigned long long>(counter.fetch_add(1) + 1));
  return SessionId{buf};
}

Session::Session(SessionId id, std::shared_ptr<const Clock> clock)
    : id_(std::move(id)), clock_(std::move(clock)) {
  if (!clock_) throw Error(ErrorCode::InvalidArgument, "session needs a clock");
}

void Session::open(const SessionConfig& config) {
  std::lock_guard lock(mu_);
  if (state_ != State::Fresh) {
    throw Error(ErrorCode::DuplicateOpen, "duplicate open on session " + id_.value);
  }
  if (config.max_duration_ms <= 0) {
    throw Error(ErrorCode::InvalidArgument, "max_duration must be positive");
  }
  config_ = config;
  opened_at_ = clock_->now_ms();
  log_.clear();
  turn_ = TurnState{};
  state_ = State::Open;
}

std::int64_t Session::elapsed_locked() const { return clock_->now_ms() - opened_at_; }

std::int64_t Session::elapsed_ms() const {
  std::lock_guard lock(mu_);
  return elapsed_locked();
}

std::uint64_t Session::append_locked(FrameKind kind, Json payload, bool truncated) {
  std::int64_t ts = std::clamp<std::int64_t>(elapsed_locked(), 0, config_.max_duration_ms);
  if (!log_.empty()) ts = std::max(ts, log_.back().ts_ms);
  EventFrame f;
  f.seq = log_.size();
  f.ts_ms = ts;
  f.kind = kind;
  f.payload = std::move(payload);
  f.truncated = truncated;
  turn_ = step_turn_state(turn_, turn_event_of(f)).state;
  log_.push_back(std::move(f));
  return log_.back().seq;
}

bool Session::check_timeout_locked() {
  if (!log_.empty() && control_action(log_.back()) == kControlTimeout) return true;
  if (elapsed_locked() <= config_.max_duration_ms) return false;
  append_locked(FrameKind::SessionControl, Json{{"action", kControlTimeout}}, false);
  return true;
}

bool Session::at_boundary_locked() const { return !open_utterance_ && !truncation_; }

void Session::flush_deferred_locked() {
  if (!at_boundary_locked() || deferred_.empty()) return;
  auto pending = std::move(deferred_);
  deferred_.clear();
  for (auto& body : pending) append_locked(body.kind, std::move(body.payload), false);
}

void Session::resolve_truncation_locked() {
  if (!truncation_) return;
  auto utterance = truncation_->utterance;
  truncation_.reset();
  if (utterance >= 0) truncated_utterances_.insert(utterance);
  if (open_utterance_ == utterance) open_utterance_.reset();
  append_locked(FrameKind::SessionControl, Json{{"action", kControlTruncated}, {"utterance", utterance}}, false);
  flush_deferred_locked();
}

std::uint64_t Session::submit_locked(FrameKind kind, Json payload) {
  switch (kind) {
    case FrameKind::TalkerUtteranceChunk: {
      const auto utterance = payload.at("utterance").get<std::int64_t>();
      const bool final = payload.value("final", false);
      if (truncated_utterances_.count(utterance) != 0) {
        throw Error(ErrorCode::ChunkRejected,
                    "chunk rejected: utterance " + std::to_string(utterance) + " was truncated");
      }
      if (truncation_ && truncation_->utterance == utterance) {
        if (truncation_->remaining == 0) {
          resolve_truncation_locked();
          throw Error(ErrorCode::ChunkRejected, "chunk rejected: barge-in grace exhausted");
        }
        --truncation_->remaining;
        const bool cut = truncation_->remaining == 0 && !final;
        auto seq = append_locked(kind, std::move(payload), cut);
        if (final) {
          truncation_.reset();
          open_utterance_.reset();
          flush_deferred_locked();
        } else if (cut) {
          resolve_truncation_locked();
        }
        return seq;
      }
      if (truncation_) resolve_truncation_locked();
      auto seq = append_locked(kind, std::move(payload), false);
      if (final) {
        open_utterance_.reset();
        flush_deferred_locked();
      } else {
        open_utterance_ = utterance;
      }
      return seq;
    }
    case FrameKind::PatientUtterance: {
      if (payload.value("end_of_turn", false)) resolve_truncation_locked();
      return append_locked(kind, std::move(payload), false);
    }
    case FrameKind::BargeIn: {
      auto before = turn_;
      auto seq = append_locked(kind, std::move(payload), false);
      if (step_turn_state(before, TurnEvent::BargeIn).action == TurnAction::TruncateTalker) {
        truncation_ = TruncationWindow{open_utterance_.value_or(-1), config_.barge_in_grace};
      }
      return seq;
    }
    case FrameKind::SessionControl: {
      auto action = payload.value("action", std::string{});
      if (action == kControlTruncated || action == kControlTimeout) {
        throw Error(ErrorCode::MalformedPayload, "SessionControl action '" + action + "' is reserved");
      }
      return append_locked(kind, std::move(payload), false);
    }
    default:
      return append_locked(kind, std::move(payload), false);
  }
}

std::uint64_t Session::submit(FrameKind kind, Json payload) {
  std::unique_lock lock(mu_);
  if (state_ != State::Open) {
    throw Error(ErrorCode::ClosedSession, "closed session " + id_.value);
  }
  validate_payload(kind, payload);
  if (check_timeout_locked()) {
    cv_.notify_all();
    throw Error(ErrorCode::SessionTimeout, "session " + id_.value + " exceeded max_duration");
  }
  auto seq = submit_locked(kind, std::move(payload));
  lock.unlock();
  cv_.notify_all();
  return seq;
}

TruncationRecord Session::apply_barge_in(std::span<const Json> in_flight) {
  std::unique_lock lock(mu_);
  if (state_ != State::Open) throw Error(ErrorCode::ClosedSession, "closed session " + id_.value);
  if (!truncation_) throw Error(ErrorCode::NoPendingTruncation, "no pending truncation on " + id_.value);
  TruncationRecord record;
  const auto utterance = truncation_->utterance;
  for (const auto& chunk : in_flight) {
    Json payload = chunk;
    if (payload.is_object() && !payload.contains("utterance")) payload["utterance"] = utterance;
    validate_payload(FrameKind::TalkerUtteranceChunk, payload);
    if (!truncation_ || payload.at("utterance").get<std::int64_t>() != utterance ||
        truncation_->remaining == 0) {
      ++record.rejected;
      continue;
    }
    auto seq = submit_locked(FrameKind::TalkerUtteranceChunk, std::move(payload));
    ++record.accepted;
    if (log_[seq].truncated) ++record.marked_truncated;
  }
  resolve_truncation_locked();
  lock.unlock();
  cv_.notify_all();
  return record;
}

void Session::post_at_turn_boundary(std::vector<FrameBody> frames) {
  std::unique_lock lock(mu_);
  if (state_ != State::Open) throw Error(ErrorCode::ClosedSession, "closed session " + id_.value);
  for (const auto& f : frames) {
    if (f.kind != FrameKind::DirectiveInjected && f.kind != FrameKind::GoalStateChange) {
      throw Error(ErrorCode::InvalidArgument, "only planner frames may be posted at a turn boundary");
    }
    validate_payload(f.kind, f.payload);
  }
  for (auto& f : frames) deferred_.push_back(std::move(f));
  flush_deferred_locked();
  lock.unlock();
  cv_.notify_all();
}

trace::EncounterTrace Session::close() {
  std::unique_lock lock(mu_);
  if (state_ == State::Closed) throw Error(ErrorCode::DoubleClose, "double close on session " + id_.value);
  if (state_ == State::Fresh) throw Error(ErrorCode::ClosedSession, "session " + id_.value + " was never opened");
  if (!check_timeout_locked()) {
    resolve_truncation_locked();
    open_utterance_.reset();
    flush_deferred_locked();
  }
  deferred_.clear();
  state_ = State::Closed;
  trace::TraceMetadata meta{config_.scenario_id, config_.arm, config_.actor_id, opened_at_, id_.value};
  auto frames = log_;
  lock.unlock();
  cv_.notify_all();
  return trace::EncounterTrace(std::move(meta), std::move(frames));
}

std::int64_t Session::next_utterance_id() {
  std::lock_guard lock(mu_);
  return next_utterance_++;
}

std::vector<EventFrame> Session::frames_since(std::uint64_t seq) const {
  std::lock_guard lock(mu_);
  if (seq >= log_.size()) return {};
  return {log_.begin() + static_cast<std::ptrdiff_t>(seq), log_.end()};
}

std::size_t Session::size() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

TurnState Session::turn_state() const {
  std::lock_guard lock(mu_);
  return turn_;
}

bool Session::pending_truncation() const {
  std::lock_guard lock(mu_);
  return truncation_.has_value();
}

bool Session::is_open() const {
  std::lock_guard lock(mu_);
  return state_ == State::Open;
}

bool Session::is_closed() const {
  std::lock_guard lock(mu_);
  return state_ == State::Closed;
}

std::size_t Session::wait_for_frames(std::size_t seq_count, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return log_.size() > seq_count || state_ == State::Closed; });
  return log_.size();
}

SessionRegistry::SessionRegistry(ScenarioResolver resolver, std::shared_ptr<const Clock> clock)
    : resolver_(std::move(resolver)), clock_(std::move(clock)) {}

SessionId SessionRegistry::open_session(const SessionConfig& config) {
  if (!resolver_ || !resolver_(config.scenario_id)) {
    throw Error(ErrorCode::UnknownScenario, "unknown scenario '" + config.scenario_id + "'");
  }
  auto session = std::make_shared<Session>(make_session_id(), clock_);
  session->open(config);
  std::lock_guard lock(mu_);
  auto id = session->id();
  sessions_.emplace(id, std::move(session));
  return id;
}

std::shared_ptr<Session> SessionRegistry::get(const SessionId& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "unknown session '" + id.value + "'");
  return it->second;
}

std::vector<SessionId> SessionRegistry::ids() const {
  std::lock_guard lock(mu_);
  std::vector<SessionId> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

std::uint64_t SessionRegistry::submit_frame(const SessionId& id, FrameKind kind, Json payload) {
  return get(id)->submit(kind, std::move(payload));
}

TruncationRecord SessionRegistry::apply_barge_in(const SessionId& id, std::span<const Json> in_flight) {
  return get(id)->apply_barge_in(in_flight);
}

trace::EncounterTrace SessionRegistry::close_session(const SessionId& id) {
  return get(id)->close();
}

}  // namespace telesim::session
