#include "telesim/study/encounter.hpp"

#include "telesim/common/error.hpp"
#include "telesim/patient/patient.hpp"
#include "telesim/session/clock.hpp"

namespace telesim::study {

using session::EventFrame;
using session::FrameKind;

EncounterHost::EncounterHost(std::shared_ptr<session::Session> session,
                             std::shared_ptr<const patient::ScenarioScript> scenario, Arm arm,
                             std::shared_ptr<talker::ResponderBackend> backend,
                             EncounterOptions options, std::function<void(std::int64_t)> advance)
    : session_(std::move(session)),
      scenario_(std::move(scenario)),
      arm_(arm),
      backend_(std::move(backend)),
      options_(std::move(options)),
      advance_(std::move(advance)) {
  if (arm_uses_planner(arm_)) planner_ = std::make_unique<planner::Planner>(scenario_, options_.planner);
}

void EncounterHost::sync_planner() {
  if (!planner_) return;
  auto delta = session_->frames_since(planner_->next_seq());
  auto out = planner_->ingest(delta);
  if (!out.empty()) session_->post_at_turn_boundary(std::move(out));
}

Json observe_signs(const patient::ScenarioScript& scenario, std::int64_t t_ms) {
  Json signs = Json::array();
  for (const auto* s : patient::visible_state(scenario, t_ms)) signs.push_back(s->id);
  return Json{{"signs", signs}};
}

TalkerTurn EncounterHost::talker_turn(const talker::EmitHooks& extra) {
  if (!backend_) throw Error(ErrorCode::Backend, "no talker backend for arm " + std::string(to_string(arm_)));
  sync_planner();

  talker::DialogueContext ctx;
  ctx.trace_prefix = session_->frames_since(0);
  std::vector<planner::Directive> directives;
  if (planner_) directives = planner_->directives();
  auto plan = talker::compose_reply(ctx, directives, *backend_);

  talker::EmitHooks hooks;
  hooks.before_chunk = [&](const talker::PlanChunk& c, std::size_t i) {
    if (advance_) advance_(options_.chunk_ms);
    return extra.before_chunk ? extra.before_chunk(c, i) : true;
  };
  auto emitted = talker::emit_plan(*session_, plan, hooks);
  ++turns_;

  TalkerTurn turn;
  turn.interrupted = emitted.interrupted;
  for (auto seq : emitted.seqs)
    for (const auto& f : session_->frames_since(seq)) {
      if (f.seq != seq) break;
      if (f.kind == FrameKind::TalkerUtteranceChunk && !f.truncated) {
        if (!turn.text.empty()) turn.text += ' ';
        turn.text += session::payload_text(f);
      }
    }
  if (plan.frame_request && !emitted.interrupted) {
    std::optional<std::uint64_t> req;
    if (!emitted.seqs.empty()) req = emitted.seqs.back();
    auto scenario = scenario_;
    talker::request_frame(*session_, [scenario](std::int64_t t) { return observe_signs(*scenario, t); }, req);
  }
  turn.closed = plan.close;
  return turn;
}

trace::EncounterTrace EncounterHost::finish(const std::string& reason) {
  if (session_->is_open()) {
    try {
      session_->submit(FrameKind::SessionControl, Json{{"action", session::kControlClose}, {"reason", reason}});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SessionTimeout) throw;
    }
  }
  return session_->close();
}

SimulatedEncounter simulate_encounter(std::shared_ptr<const patient::ScenarioScript> scenario,
                                      Arm arm, const std::string& actor,
                                      std::shared_ptr<talker::ResponderBackend> backend,
                                      const EncounterOptions& options, const std::string& session_id) {
  auto clock = std::make_shared<session::ManualClock>(0);
  auto sess = std::make_shared<session::Session>(session::SessionId{session_id}, clock);
  session::SessionConfig cfg;
  cfg.scenario_id = scenario->id;
  cfg.arm = arm;
  cfg.actor_id = actor;
  cfg.max_duration_ms = options.max_duration_ms;
  cfg.barge_in_grace = options.barge_in_grace;
  sess->open(cfg);

  EncounterHost host(sess, scenario, arm, std::move(backend), options,
                     [clock](std::int64_t ms) { clock->advance(ms); });
  patient::PatientState patient(scenario);

  SimulatedEncounter out;
  out.end_reason = "max_turns";
  try {
    for (int turn = 0; turn < options.max_turns; ++turn) {
      auto t = host.talker_turn();
      if (t.closed) {
        out.end_reason = "closed";
        break;
      }
      auto reply = patient::respond(t.text, patient);
      clock->advance(options.reply_ms);
      if (reply.marker) {
        clock->advance(1000 * reply.marker->value("duration_s", std::int64_t{0}));
        sess->submit(FrameKind::ManeuverMarker, *reply.marker);
      }
      sess->submit(FrameKind::PatientUtterance, reply.utterance);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SessionTimeout) throw;
    out.end_reason = "timeout";
  }
  // Let the planner see the last exchange so its snapshots cover the whole encounter.
  if (out.end_reason != "timeout") host.sync_planner();
  out.trace = host.finish(out.end_reason);
  if (host.planner()) out.planner_snapshots = host.planner()->snapshots();
  return out;
}

}  // namespace telesim::study
