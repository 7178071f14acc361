#include <gtest/gtest.h>

#include <thread>

#include "support.hpp"  // before httplib: resolv.h defines _res, which Eigen uses

#include <httplib.h>

#include "telesim/common/error.hpp"
#include "telesim/scoring/scoring.hpp"
#include "telesim/service/service.hpp"
#include "telesim/study/encounter.hpp"

using namespace telesim;
using namespace telesim::testing;
using session::FrameKind;

namespace {

std::shared_ptr<study::ScenarioStore> demo_store() {
  auto store = std::make_shared<study::ScenarioStore>();
  for (const auto& id : demo_templates()) store->add(id, *demo_scenario(id), demo_rubric(id));
  return store;
}

study::BackendSpec scripted(const std::string& name) {
  study::BackendSpec b;
  b.script = data_file("scripts/" + name + ".json");
  return b;
}

service::ServiceOptions options(const std::filesystem::path& out, bool manual = true) {
  service::ServiceOptions o;
  o.out_dir = out;
  o.manual_clock = manual;
  o.backends[Arm::Coclinician] = scripted("clinician_generic");
  o.backends[Arm::CoclinicianNoPlanner] = scripted("clinician_generic");
  return o;
}

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const service::ServiceError& e) {
    return e.status;
  }
  ADD_FAILURE() << "no ServiceError";
  return 0;
}

// Text of the talker's latest utterance among `frames`.
std::string last_talker_text(const std::vector<Json>& frames) {
  std::string text;
  for (const auto& f : frames) {
    if (f.at("kind") == "PatientUtterance") text.clear();
    if (f.at("kind") == "TalkerUtteranceChunk") text += (text.empty() ? "" : " ") + f["payload"]["text"].get<std::string>();
  }
  return text;
}

// Plays the simulated patient against a live session the way the batch
// driver does, posting frames with advance_ms on the manual clock.
void play_patient(service::Service& svc, const std::string& id, const std::string& scenario, int max_turns) {
  patient::PatientState st(demo_scenario(scenario));
  std::uint64_t from = 0;
  std::vector<Json> seen;
  const study::EncounterOptions defaults;
  for (int turn = 0; turn < max_turns + 1; ++turn) {
    for (auto& f : svc.stream(id, from, true)) {
      from = f.at("seq").get<std::uint64_t>() + 1;
      seen.push_back(std::move(f));
    }
    if (!seen.empty() && seen.back().at("kind") == "SessionControl") return;
    auto reply = patient::respond(last_talker_text(seen), st);
    Json batch = Json::array();
    if (reply.marker) {
      batch.push_back({{"kind", "ManeuverMarker"},
                       {"payload", *reply.marker},
                       {"advance_ms", defaults.reply_ms + 1000 * reply.marker->value("duration_s", std::int64_t{0})}});
      batch.push_back({{"kind", "PatientUtterance"}, {"payload", reply.utterance}});
    } else {
      batch.push_back({{"kind", "PatientUtterance"}, {"payload", reply.utterance}, {"advance_ms", defaults.reply_ms}});
    }
    if (svc.submit(id, batch).at("closed").get<bool>()) return;
  }
}

Json full_sheet(const scoring::CaseRubric& rubric, int item, int rating) {
  Json items = Json::object(), universal = Json::object();
  for (const auto& it : rubric.items) items[it.id] = item;
  for (const auto& c : scoring::universal_criteria()) universal[std::string(c.id)] = rating;
  return {{"items", items}, {"universal", universal}, {"rater", "r1"}};
}

}  // namespace

TEST(Service, SessionStartsWithGreeting) {
  TempDir dir;
  service::Service svc(demo_store(), options(dir.path));
  auto created = svc.create_session({{"scenario", "mg_demo"}, {"arm", "coclinician"}, {"actor", "a"}});
  auto id = created.at("id").get<std::string>();
  auto frames = svc.stream(id, 0, false);
  ASSERT_FALSE(frames.empty());
  EXPECT_EQ(frames[0].at("kind"), "TalkerUtteranceChunk");
  EXPECT_FALSE(frames[0].at("payload").contains("step"));  // blinded
  EXPECT_EQ(created.at("stream"), "/sessions/" + id + "/stream");
}

TEST(Service, UnknownIdsAndBadRequests) {
  TempDir dir;
  service::Service svc(demo_store(), options(dir.path));
  EXPECT_EQ(status_of([&] { svc.stream("nope", 0, false); }), 404);
  EXPECT_EQ(status_of([&] { svc.report("nope"); }), 404);
  EXPECT_EQ(status_of([&] { svc.create_session({{"scenario", "nope"}}); }), 404);
  auto id = svc.create_session({{"scenario", "mg_demo"}}).at("id").get<std::string>();
  EXPECT_EQ(status_of([&] { svc.submit(id, {{"kind", "DirectiveInjected"}, {"payload", Json::object()}}); }), 400);
  EXPECT_EQ(status_of([&] { svc.submit(id, {{"kind", "TalkerUtteranceChunk"}, {"payload", Json::object()}}); }), 400);
  EXPECT_EQ(status_of([&] { svc.submit(id, {{"kind", "bogus"}}); }), 400);
  EXPECT_EQ(status_of([&] { svc.submit_scores(id, Json::object()); }), 409);  // still open
  svc.close(id);
  EXPECT_EQ(status_of([&] { svc.close(id); }), 409);
}

TEST(Service, NonOperatorStreamIsBlinded) {
  TempDir dir;
  service::Service svc(demo_store(), options(dir.path));
  auto id = svc.create_session({{"scenario", "mg_demo"}, {"arm", "coclinician"}}).at("id").get<std::string>();
  play_patient(svc, id, "mg_demo", 60);
  auto op = svc.stream(id, 0, true);
  auto blind = svc.stream(id, 0, false);
  std::size_t planner_frames = 0;
  for (const auto& f : op) planner_frames += f.at("kind") == "DirectiveInjected" || f.at("kind") == "GoalStateChange";
  ASSERT_GT(planner_frames, 0u);
  EXPECT_EQ(blind.size() + planner_frames, op.size());
  for (const auto& f : blind) {
    EXPECT_NE(f.at("kind"), "DirectiveInjected");
    EXPECT_NE(f.at("kind"), "GoalStateChange");
    EXPECT_FALSE(f.at("payload").contains("directive"));
    EXPECT_FALSE(f.at("payload").contains("step"));
  }
  EXPECT_TRUE(svc.planner(id).at("attached").get<bool>());
}

TEST(Service, LiveReplayMatchesBatch) {
  study::EncounterOptions opt;
  for (const auto& scenario : demo_templates())
    for (auto arm : {Arm::Coclinician, Arm::CoclinicianNoPlanner}) {
      auto backend = std::make_shared<talker::ScriptedBackend>(
          talker::load_talker_script(data_file("scripts/clinician_generic.json")));
      auto batch = study::simulate_encounter(demo_scenario(scenario), arm, "a", backend, opt, "batch");

      TempDir dir;
      service::Service svc(demo_store(), options(dir.path));
      auto id = svc.create_session({{"scenario", scenario}, {"arm", to_string(arm)}, {"actor", "a"}})
                    .at("id").get<std::string>();
      play_patient(svc, id, scenario, opt.max_turns);
      auto live = trace::import_trace(svc.trace_text(id));
      EXPECT_EQ(live.frames(), batch.trace.frames()) << scenario << " " << to_string(arm);
      EXPECT_EQ(svc.report(id).at("end_reason"), batch.end_reason);
    }
}

TEST(Service, ScoresReplaceWithHistory) {
  TempDir dir;
  auto store = demo_store();
  service::Service svc(store, options(dir.path));
  auto id = svc.create_session({{"scenario", "asthma_demo"}, {"arm", "coclinician"}}).at("id").get<std::string>();
  play_patient(svc, id, "asthma_demo", 60);
  const auto& rubric = store->rubric("asthma_demo");

  auto partial = full_sheet(rubric, 1, 3);
  partial["universal"].erase("U01");
  EXPECT_THROW(svc.submit_scores(id, partial), Error);  // mapped to 400 over HTTP

  auto first = svc.submit_scores(id, full_sheet(rubric, 1, 3));
  EXPECT_TRUE(first.at("replaces").is_null());
  auto second = svc.submit_scores(id, full_sheet(rubric, 2, 5));
  EXPECT_EQ(second.at("replaces"), first.at("score_id"));

  auto s = svc.scores(id);
  ASSERT_EQ(s.at("history").size(), 2u);
  EXPECT_EQ(s.at("history")[0].at("superseded_by"), second.at("score_id"));
  EXPECT_EQ(s.at("current").at("rater"), "manual:r1");
  auto report = svc.report(id);
  EXPECT_EQ(report.at("rater").at("score_id"), second.at("score_id"));
  EXPECT_DOUBLE_EQ(report.at("rater").at("score").at("total_percent").get<double>(), 100.0);
  EXPECT_TRUE(report.contains("audit"));
  EXPECT_TRUE(std::filesystem::exists(dir.path / "scores"));
}

TEST(Service, LiveFulfillerTakesQueuedEncounter) {
  TempDir dir;
  service::Service svc(demo_store(), options(dir.path));
  auto fulfil = svc.live_fulfiller(std::chrono::seconds(20));
  study::Assignment a{"actorX", "mg_demo", Arm::Human, 0};
  std::optional<trace::EncounterTrace> got;
  std::thread waiter([&] { got = fulfil(a, "enc-1"); });
  while (svc.queue().empty()) std::this_thread::sleep_for(std::chrono::milliseconds(2));
  EXPECT_EQ(svc.queue()[0].at("encounter_id"), "enc-1");
  EXPECT_EQ(status_of([&] { svc.create_session({{"scenario", "asthma_demo"}, {"arm", "human"}, {"encounter_id", "enc-1"}}); }),
            409);
  auto id = svc.create_session({{"scenario", "mg_demo"}, {"arm", "human"}, {"encounter_id", "enc-1"}})
                .at("id").get<std::string>();
  // Human arm: the clinician posts talker frames.
  svc.submit(id, {{"kind", "TalkerUtteranceChunk"},
                  {"payload", {{"text", "Hello, I'm Dr. Lee."}, {"utterance", 0}, {"final", true}}},
                  {"advance_ms", 1000}});
  svc.submit(id, {{"kind", "PatientUtterance"}, {"payload", {{"text", "Hi."}, {"end_of_turn", true}}}});
  svc.close(id);
  waiter.join();
  ASSERT_TRUE(got);
  EXPECT_EQ(got->metadata().actor, "actorX");
  EXPECT_EQ(got->size(), 3u);
  EXPECT_TRUE(svc.queue().empty());
}

TEST(Service, HttpSmoke) {
  TempDir dir;
  service::Service svc(demo_store(), options(dir.path, false));
  httplib::Server server;
  svc.mount(server);
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  auto created = cli.Post("/sessions", R"({"scenario":"rotator_cuff_demo","arm":"coclinician_no_planner"})",
                          "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  auto id = Json::parse(created->body).at("id").get<std::string>();
  auto stream = cli.Get("/sessions/" + id + "/stream?from=0&wait_ms=100");
  ASSERT_TRUE(stream);
  EXPECT_EQ(stream->status, 200);
  auto first_line = stream->body.substr(0, stream->body.find('\n'));
  EXPECT_EQ(Json::parse(first_line).at("kind"), "TalkerUtteranceChunk");
  auto posted = cli.Post("/sessions/" + id + "/stream",
                         R"({"kind":"PatientUtterance","payload":{"text":"My shoulder hurts.","end_of_turn":true}})",
                         "application/json");
  ASSERT_TRUE(posted);
  EXPECT_EQ(posted->status, 200);
  EXPECT_EQ(cli.Get("/sessions/missing/stream")->status, 404);
  EXPECT_EQ(cli.Post("/sessions/" + id + "/stream", "{not json", "application/json")->status, 400);
  EXPECT_EQ(cli.Post("/sessions/" + id + "/close", "", "application/json")->status, 200);
  auto report = cli.Get("/reports/" + id);
  ASSERT_TRUE(report);
  EXPECT_EQ(report->status, 200);
  EXPECT_EQ(Json::parse(report->body).at("arm"), "coclinician_no_planner");
  server.stop();
  th.join();
}
