#include <gtest/gtest.h>

#include <thread>

#include "support.hpp"  // before httplib: resolv.h defines _res, which Eigen uses

#include <httplib.h>

#include "telesim/common/error.hpp"

using namespace telesim;
using namespace telesim::testing;
using session::Cite;
using session::EvidenceSource;
using session::FrameKind;

namespace {

const Json kScript = {
    {"name", "t"},
    {"greeting", {"Hello. I'm the doctor today."}},
    {"acknowledge", "Thanks for telling me."},
    {"steps",
     {{{"id", "onset"}, {"say", {"When did it start?"}}},
      {{"id", "look"}, {"say", {"Let me have a look."}}, {"frame_request", true}},
      {{"id", "sum"},
       {"say", {"You mentioned double vision."}},
       {"cites", {{{"finding", "diplopia"}, {"source", "patient-reported"}}}}}}},
    {"answers", {{{"patterns", {"serious"}}, {"say", {"It is treatable."}}}}},
    {"closing", {"Take care."}}};

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "nothing thrown";
  return ErrorCode::InvalidArgument;
}

struct Conversation {
  std::shared_ptr<session::ManualClock> clock = std::make_shared<session::ManualClock>(0);
  std::shared_ptr<session::Session> s = std::make_shared<session::Session>(session::SessionId{"c"}, clock);
  talker::ScriptedBackend backend{talker::parse_talker_script(kScript)};

  Conversation() {
    session::SessionConfig cfg;
    cfg.max_duration_ms = 1 << 30;
    s->open(cfg);
  }
  talker::UtterancePlan turn(const std::vector<planner::Directive>& d = {}) {
    talker::DialogueContext ctx{s->frames_since(0), {}};
    auto plan = talker::compose_reply(ctx, d, backend);
    clock->advance(1000);
    talker::emit_plan(*s, plan);
    return plan;
  }
  void patient(const std::string& text, Json findings = Json::array()) {
    clock->advance(1000);
    s->submit(FrameKind::PatientUtterance, {{"text", text}, {"end_of_turn", true}, {"findings", findings}});
  }
};

class Broken : public talker::ResponderBackend {
 public:
  explicit Broken(int mode) : mode_(mode) {}
  std::string name() const override { return "broken"; }
  talker::UtterancePlan reply(const talker::DialogueContext&, std::span<const planner::Directive>) override {
    if (mode_ == 0) throw std::runtime_error("boom");
    talker::UtterancePlan p;
    if (mode_ == 2) p.chunks.push_back({"", {}});
    return p;
  }

 private:
  int mode_;
};

}  // namespace

TEST(Talker, ScriptWalksGreetingStepsClosing) {
  Conversation c;
  auto g = c.turn();
  EXPECT_EQ(g.step, "greeting");
  ASSERT_EQ(g.chunks.size(), 2u);
  c.patient("I have double vision.", {"diplopia"});
  EXPECT_EQ(c.turn().step, "onset");
  c.patient("Two weeks ago.");
  auto look = c.turn();
  EXPECT_EQ(look.step, "look");
  EXPECT_TRUE(look.frame_request);
  c.patient("Okay.");
  auto sum = c.turn();
  ASSERT_EQ(sum.chunks[0].cites.size(), 1u);
  // Cite resolved against the patient frame that carried the finding.
  EXPECT_EQ(sum.chunks[0].cites[0].frame, std::optional<std::uint64_t>(2));
  c.patient("Is it serious?");
  auto last = c.turn();
  EXPECT_EQ(last.chunks.front().text, "It is treatable.");
  EXPECT_TRUE(last.close);

  bool capture = false;
  for (const auto& f : c.s->frames_since(0)) capture |= f.kind == FrameKind::FrameCaptureRequest;
  EXPECT_TRUE(capture);
}

TEST(Talker, TopDirectiveIsRealizedAndAcknowledged) {
  Conversation c;
  c.turn();
  c.patient("My eyelid droops.", {"ptosis"});
  planner::Directive top{"inspect", planner::GoalKind::VisualInspection, "Please look into the camera.", 0,
                         {Cite{"ptosis", EvidenceSource::PatientReported, 2}}};
  planner::Directive next{"hx", planner::GoalKind::ElicitHistory, "Ask about onset.", 1, {}};
  auto plan = c.turn({top, next});
  EXPECT_EQ(plan.directive, "inspect");
  EXPECT_TRUE(plan.frame_request);
  ASSERT_EQ(plan.chunks.size(), 2u);
  EXPECT_EQ(plan.chunks[0].text, "Thanks for telling me.");
  EXPECT_EQ(plan.chunks[0].cites, top.cites);
  EXPECT_EQ(plan.chunks[1].text, "Please look into the camera.");
  auto frames = c.s->frames_since(0);
  EXPECT_EQ(frames[frames.size() - 2].payload.at("directive"), "inspect");
  // The scripted step cursor did not move.
  EXPECT_EQ(c.turn().step, "onset");
}

TEST(Talker, ComposeReplyErrors) {
  talker::DialogueContext ctx;
  planner::Directive a{"a", planner::GoalKind::ElicitHistory, "x", 2, {}};
  planner::Directive b{"b", planner::GoalKind::ElicitHistory, "y", 1, {}};
  Broken ok(1);
  std::vector<planner::Directive> unsorted{a, b};
  EXPECT_EQ(code_of([&] { talker::compose_reply(ctx, unsorted, ok); }), ErrorCode::InvalidArgument);
  for (int mode : {0, 1, 2}) {
    Broken backend(mode);
    EXPECT_EQ(code_of([&] { talker::compose_reply(ctx, {}, backend); }), ErrorCode::Backend) << mode;
  }
}

TEST(Talker, FailingBackendFailsThenDelegates) {
  auto inner = std::make_shared<talker::ScriptedBackend>(talker::parse_talker_script(kScript));
  talker::FailingBackend twice(inner, 2);
  talker::DialogueContext ctx;
  EXPECT_EQ(code_of([&] { twice.reply(ctx, {}); }), ErrorCode::Transport);
  EXPECT_EQ(code_of([&] { twice.reply(ctx, {}); }), ErrorCode::Transport);
  EXPECT_EQ(twice.reply(ctx, {}).step, "greeting");
  talker::FailingBackend always(inner, -1);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(code_of([&] { always.reply(ctx, {}); }), ErrorCode::Transport);
}

TEST(Talker, SplitSentences) {
  EXPECT_EQ(talker::split_sentences("One. Two? Three!"), (std::vector<std::string>{"One.", "Two?", "Three!"}));
  EXPECT_EQ(talker::split_sentences("Dose is 2.5 mg daily. Okay"),
            (std::vector<std::string>{"Dose is 2.5 mg daily.", "Okay"}));
  EXPECT_TRUE(talker::split_sentences("").empty());
}

TEST(Talker, EmitPlanStopsAtBargeIn) {
  Conversation c;
  talker::UtterancePlan plan;
  for (int i = 0; i < 5; ++i) plan.chunks.push_back({"Sentence " + std::to_string(i) + ".", {}});
  plan.frame_request = true;
  talker::EmitHooks hooks;
  hooks.before_chunk = [](const talker::PlanChunk&, std::size_t i) { return i != 2; };
  auto r = talker::emit_plan(*c.s, plan, hooks);
  EXPECT_TRUE(r.interrupted);
  EXPECT_EQ(r.truncation.accepted, 1u);  // default grace
  EXPECT_EQ(r.truncation.rejected, 2u);
  EXPECT_EQ(r.seqs.size(), 3u);
  for (const auto& f : c.s->frames_since(0)) EXPECT_NE(f.kind, FrameKind::FrameCaptureRequest);
}

TEST(Talker, PlanJsonRoundTrip) {
  talker::UtterancePlan p;
  p.chunks = {{"A.", {Cite{"x", EvidenceSource::Observed, 3}}}, {"B.", {}}};
  p.frame_request = true;
  p.directive = "g";
  p.step = "s";
  EXPECT_EQ(talker::plan_from_json(talker::to_json(p)), p);
}

TEST(Talker, ScriptValidation) {
  auto bad = kScript;
  bad.erase("name");
  EXPECT_THROW(talker::parse_talker_script(bad), Error);
  for (const auto* name : {"clinician_generic", "pcp_generic", "realtime_generic", "sloppy"})
    EXPECT_NO_THROW(talker::load_talker_script(data_file(std::string("scripts/") + name + ".json"))) << name;
}

TEST(Talker, RemoteBackendOverHttp) {
  httplib::Server server;
  Json seen;
  server.Post("/reply", [&](const httplib::Request& req, httplib::Response& res) {
    seen = Json::parse(req.body);
    talker::UtterancePlan p;
    p.chunks = {{"From afar.", {}}};
    res.set_content(talker::to_json(p).dump(), "application/json");
  });
  server.Post("/fail", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  talker::RemoteConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/reply";
  talker::RemoteBackend remote(cfg);
  talker::DialogueContext ctx;
  planner::Directive d{"g", planner::GoalKind::ElicitHistory, "Ask.", 0, {}};
  std::vector<planner::Directive> dirs{d};
  auto plan = talker::compose_reply(ctx, dirs, remote);
  EXPECT_EQ(plan.text(), "From afar.");
  EXPECT_EQ(seen.at("directives").size(), 1u);
  EXPECT_TRUE(seen.at("context").contains("frames"));

  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/fail";
  talker::RemoteBackend failing(cfg);
  auto code = code_of([&] { talker::compose_reply(ctx, {}, failing); });
  EXPECT_TRUE(code == ErrorCode::Transport || code == ErrorCode::Backend);
  server.stop();
  th.join();

  cfg.endpoint = "ftp://nope";
  EXPECT_THROW(talker::RemoteBackend{cfg}, Error);
}
