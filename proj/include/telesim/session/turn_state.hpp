#pragma once

#include <array>
#include <span>
#include <string_view>

#include "telesim/session/frame.hpp"

namespace telesim::session {

enum class Phase { Idle, PatientTurn, TalkerTurn, Overlap };

inline constexpr std::array<Phase, 4> kAllPhases = {
    Phase::Idle, Phase::PatientTurn, Phase::TalkerTurn, Phase::Overlap};

std::string_view to_string(Phase phase);

struct TurnState {
  Phase phase = Phase::Idle;
  // Only meaningful in Overlap: a barge-in is waiting for the talker to stop.
  bool pending_truncation = false;

  bool operator==(const TurnState&) const = default;
};

/// Turn-taking events. Frame kinds are refined where the turn protocol needs
/// more detail than the kind alone: patient speech vs. end of the patient's
/// turn, a talker chunk vs. the final chunk of an utterance, and the
/// SessionControl actions.
enum class TurnEvent {
  PatientSpeech,
  PatientTurnEnd,
  TalkerChunk,
  TalkerFinalChunk,
  BargeIn,
  FrameCaptureRequest,
  FrameObservation,
  DirectiveInjected,
  ManeuverMarker,
  GoalStateChange,
  ControlClose,
  ControlTimeout,
  ControlTruncationComplete,
  ControlOther,
};

inline constexpr std::array<TurnEvent, 14> kAllTurnEvents = {
    TurnEvent::PatientSpeech,      TurnEvent::PatientTurnEnd,
    TurnEvent::TalkerChunk,        TurnEvent::TalkerFinalChunk,
    TurnEvent::BargeIn,            TurnEvent::FrameCaptureRequest,
    TurnEvent::FrameObservation,   TurnEvent::DirectiveInjected,
    TurnEvent::ManeuverMarker,     TurnEvent::GoalStateChange,
    TurnEvent::ControlClose,       TurnEvent::ControlTimeout,
    TurnEvent::ControlTruncationComplete, TurnEvent::ControlOther};

std::string_view to_string(TurnEvent event);

enum class TurnAction { None, TruncateTalker };

struct TurnStep {
  TurnState state;
  TurnAction action = TurnAction::None;

  bool operator==(const TurnStep&) const = default;
};

// SessionControl action names with protocol meaning.
inline constexpr std::string_view kControlClose = "close";
inline constexpr std::string_view kControlTimeout = "timeout";
inline constexpr std::string_view kControlTruncated = "truncated";

TurnEvent turn_event_of(const EventFrame& frame);
TurnEvent turn_event_of(FrameKind kind, const Json& payload);

/// The turn-taking transition function. Total and pure: every (state, event)
/// pair maps to a successor.
TurnStep step_turn_state(TurnState state, TurnEvent event) noexcept;

/// Folds step_turn_state over a frame sequence starting from Idle.
TurnState replay_turn_state(std::span<const EventFrame> frames) noexcept;

}  // namespace telesim::session
