#include "telesim/session/turn_state.hpp"

namespace telesim::session {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Idle: return "Idle";
    case Phase::PatientTurn: return "PatientTurn";
    case Phase::TalkerTurn: return "TalkerTurn";
    case Phase::Overlap: return "Overlap";
  }
  return "Idle";
}

std::string_view to_string(TurnEvent event) {
  switch (event) {
    case TurnEvent::PatientSpeech: return "PatientSpeech";
    case TurnEvent::PatientTurnEnd: return "PatientTurnEnd";
    case TurnEvent::TalkerChunk: return "TalkerChunk";
    case TurnEvent::TalkerFinalChunk: return "TalkerFinalChunk";
    case TurnEvent::BargeIn: return "BargeIn";
    case TurnEvent::FrameCaptureRequest: return "FrameCaptureRequest";
    case TurnEvent::FrameObservation: return "FrameObservation";
    case TurnEvent::DirectiveInjected: return "DirectiveInjected";
    case TurnEvent::ManeuverMarker: return "ManeuverMarker";
    case TurnEvent::GoalStateChange: return "GoalStateChange";
    case TurnEvent::ControlClose: return "ControlClose";
    case TurnEvent::ControlTimeout: return "ControlTimeout";
    case TurnEvent::ControlTruncationComplete: return "ControlTruncationComplete";
    case TurnEvent::ControlOther: return "ControlOther";
  }
  return "ControlOther";
}

TurnEvent turn_event_of(FrameKind kind, const Json& payload) {
  switch (kind) {
    case FrameKind::PatientUtterance:
      return payload.value("end_of_turn", false) ? TurnEvent::PatientTurnEnd : TurnEvent::PatientSpeech;
    case FrameKind::TalkerUtteranceChunk:
      return payload.value("final", false) ? TurnEvent::TalkerFinalChunk : TurnEvent::TalkerChunk;
    case FrameKind::BargeIn: return TurnEvent::BargeIn;
    case FrameKind::FrameCaptureRequest: return TurnEvent::FrameCaptureRequest;
    case FrameKind::FrameObservation: return TurnEvent::FrameObservation;
    case FrameKind::DirectiveInjected: return TurnEvent::DirectiveInjected;
    case FrameKind::ManeuverMarker: return TurnEvent::ManeuverMarker;
    case FrameKind::GoalStateChange: return TurnEvent::GoalStateChange;
    case FrameKind::SessionControl: {
      auto action = payload.value("action", std::string{});
      if (action == kControlClose) return TurnEvent::ControlClose;
      if (action == kControlTimeout) return TurnEvent::ControlTimeout;
      if (action == kControlTruncated) return TurnEvent::ControlTruncationComplete;
      return TurnEvent::ControlOther;
    }
  }
  return TurnEvent::ControlOther;
}

TurnEvent turn_event_of(const EventFrame& frame) { return turn_event_of(frame.kind, frame.payload); }

namespace {

constexpr TurnStep to(Phase phase, bool pending = false, TurnAction action = TurnAction::None) {
  return TurnStep{TurnState{phase, pending}, action};
}

}  // namespace

TurnStep step_turn_state(TurnState state, TurnEvent event) noexcept {
  // A pending flag outside Overlap carries no meaning; normalize it away.
  const bool pending = state.phase == Phase::Overlap && state.pending_truncation;
  const TurnStep stay = to(state.phase, pending);

  switch (event) {
    case TurnEvent::FrameCaptureRequest:
    case TurnEvent::FrameObservation:
    case TurnEvent::DirectiveInjected:
    case TurnEvent::ManeuverMarker:
    case TurnEvent::GoalStateChange:
    case TurnEvent::ControlOther:
      return stay;
    case TurnEvent::ControlClose:
    case TurnEvent::ControlTimeout:
      return to(Phase::Idle);
    case TurnEvent::ControlTruncationComplete:
      return state.phase == Phase::Overlap ? to(Phase::PatientTurn) : stay;
    default:
      break;
  }

  switch (state.phase) {
    case Phase::Idle:
      switch (event) {
        case TurnEvent::PatientSpeech: return to(Phase::PatientTurn);
        case TurnEvent::PatientTurnEnd: return to(Phase::Idle);
        case TurnEvent::TalkerChunk: return to(Phase::TalkerTurn);
        case TurnEvent::TalkerFinalChunk: return to(Phase::Idle);
        case TurnEvent::BargeIn: return to(Phase::PatientTurn);
        default: return stay;
      }
    case Phase::PatientTurn:
      switch (event) {
        case TurnEvent::PatientSpeech: return to(Phase::PatientTurn);
        case TurnEvent::PatientTurnEnd: return to(Phase::Idle);
        case TurnEvent::TalkerChunk: return to(Phase::Overlap);
        case TurnEvent::TalkerFinalChunk: return to(Phase::PatientTurn);
        case TurnEvent::BargeIn: return to(Phase::PatientTurn);
        default: return stay;
      }
    case Phase::TalkerTurn:
      switch (event) {
        case TurnEvent::PatientSpeech: return to(Phase::Overlap);
        case TurnEvent::PatientTurnEnd: return to(Phase::TalkerTurn);
        case TurnEvent::TalkerChunk: return to(Phase::TalkerTurn);
        case TurnEvent::TalkerFinalChunk: return to(Phase::Idle);
        case TurnEvent::BargeIn: return to(Phase::Overlap, true, TurnAction::TruncateTalker);
        default: return stay;
      }
    case Phase::Overlap:
      if (pending) {
        switch (event) {
          case TurnEvent::PatientSpeech: return to(Phase::Overlap, true);
          case TurnEvent::PatientTurnEnd: return to(Phase::Idle);
          case TurnEvent::TalkerChunk: return to(Phase::Overlap, true);
          case TurnEvent::TalkerFinalChunk: return to(Phase::PatientTurn);
          case TurnEvent::BargeIn: return to(Phase::Overlap, true);
          default: return stay;
        }
      }
      switch (event) {
        case TurnEvent::PatientSpeech: return to(Phase::Overlap);
        case TurnEvent::PatientTurnEnd: return to(Phase::TalkerTurn);
        case TurnEvent::TalkerChunk: return to(Phase::Overlap);
        case TurnEvent::TalkerFinalChunk: return to(Phase::PatientTurn);
        case TurnEvent::BargeIn: return to(Phase::Overlap, true, TurnAction::TruncateTalker);
        default: return stay;
      }
  }
  return stay;
}

TurnState replay_turn_state(std::span<const EventFrame> frames) noexcept {
  TurnState state;
  for (const auto& f : frames) state = step_turn_state(state, turn_event_of(f)).state;
  return state;
}

}  // namespace telesim::session
