// Planner fixtures on the myasthenia case: symptom-triggered injection,
// stepwise exam orchestration, context switch and resumption, omitted-slot
// retention, and maneuver course correction.

#include <gtest/gtest.h>

#include "support.hpp"
#include "telesim/common/error.hpp"
#include "telesim/planner/planner.hpp"

using namespace telesim;
using namespace telesim::testing;
using planner::GoalKind;
using planner::GoalStatus;
using session::FrameKind;

namespace {

std::shared_ptr<const patient::ScenarioScript> mg() { return without_questions(*demo_scenario("mg_demo")); }

std::vector<session::EventFrame> of_kind(const std::vector<session::EventFrame>& frames, FrameKind kind) {
  std::vector<session::EventFrame> out;
  for (const auto& f : frames)
    if (f.kind == kind) out.push_back(f);
  return out;
}

std::vector<session::EventFrame> directives_for(const std::vector<session::EventFrame>& frames, const std::string& goal) {
  std::vector<session::EventFrame> out;
  for (const auto& f : of_kind(frames, FrameKind::DirectiveInjected))
    if (f.payload.at("goal_id") == goal) out.push_back(f);
  return out;
}

const planner::Directive* directive_for(const std::vector<planner::Directive>& ds, const std::string& goal) {
  for (const auto& d : ds)
    if (d.goal_id == goal) return &d;
  return nullptr;
}

// Ask the goal's current instruction on its behalf and let the patient answer.
void realize(EncounterRig& rig, const std::string& goal) {
  auto ds = rig.directives();
  const auto* d = directive_for(ds, goal);
  ASSERT_NE(d, nullptr) << goal;
  rig.say(goal, d->instruction);
  if (d->kind == GoalKind::VisualInspection) rig.observe();
  rig.reply();
  rig.sync();
}

}  // namespace

TEST(PlannerFixtures, SymptomConfirmationInjectsInspection) {
  EncounterRig rig(mg());
  rig.sync();
  EXPECT_EQ(rig.goal("inspect_eyelids"), nullptr);
  ASSERT_NE(rig.goal("elicit_diplopia"), nullptr);

  rig.say("elicit_diplopia", "Have you noticed any double vision or blurry vision?");
  rig.reply();
  rig.sync();

  auto it = rig.model().findings.find("diplopia");
  ASSERT_NE(it, rig.model().findings.end());
  EXPECT_EQ(it->second.source, session::EvidenceSource::PatientReported);
  EXPECT_EQ(rig.goal("elicit_diplopia")->status, GoalStatus::Satisfied);

  const auto* inspect = rig.goal("inspect_eyelids");
  ASSERT_NE(inspect, nullptr);
  EXPECT_EQ(inspect->kind, GoalKind::VisualInspection);
  EXPECT_TRUE(inspect->open());
  auto posted = directives_for(rig.frames(), "inspect_eyelids");
  ASSERT_EQ(posted.size(), 1u);
  EXPECT_EQ(posted[0].payload.at("goal_kind"), "visual_inspection");
  // Injected after the patient's confirmation, at a turn boundary.
  auto patient = of_kind(rig.frames(), FrameKind::PatientUtterance);
  EXPECT_GT(posted[0].seq, patient.back().seq);
}

TEST(PlannerFixtures, StepwiseExamOneDirectivePerStep) {
  EncounterRig rig(mg());
  rig.sync();
  realize(rig, "screen_airway");
  realize(rig, "elicit_diplopia");
  realize(rig, "inspect_eyelids");
  ASSERT_EQ(rig.goal("inspect_eyelids")->status, GoalStatus::Satisfied);

  const auto* goal = rig.goal("ocular_motility");
  ASSERT_NE(goal, nullptr);
  ASSERT_EQ(goal->steps.size(), 3u);
  const auto steps = goal->steps;

  std::set<std::uint64_t> evidence_frames;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    auto ds = rig.directives();
    ASSERT_FALSE(ds.empty());
    EXPECT_EQ(ds.front().goal_id, "ocular_motility") << "step " << k;
    int count = 0;
    for (const auto& d : ds) count += d.goal_id == "ocular_motility";
    EXPECT_EQ(count, 1);
    const auto* d = directive_for(ds, "ocular_motility");
    EXPECT_EQ(d->instruction, steps[k].prompt);

    rig.say("ocular_motility", d->instruction);
    rig.reply();
    rig.sync();

    auto f = rig.model().findings.find(steps[k].slot);
    ASSERT_NE(f, rig.model().findings.end()) << steps[k].slot;
    EXPECT_EQ(f->second.source, session::EvidenceSource::Observed);
    evidence_frames.insert(f->second.frame);
    EXPECT_EQ(rig.goal("ocular_motility")->status, k + 1 < steps.size() ? GoalStatus::Active : GoalStatus::Satisfied);
  }
  EXPECT_EQ(evidence_frames.size(), 3u);

  // The log carries one directive per step, each with that step's prompt.
  auto posted = directives_for(rig.frames(), "ocular_motility");
  ASSERT_EQ(posted.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(posted[k].payload.at("instruction"), steps[k].prompt);
  EXPECT_EQ(directive_for(rig.directives(), "ocular_motility"), nullptr);
}

TEST(PlannerFixtures, ContextSwitchAndResumption) {
  EncounterRig rig(mg());
  rig.sync();
  realize(rig, "screen_airway");
  realize(rig, "elicit_diplopia");
  realize(rig, "inspect_eyelids");
  const auto steps = rig.goal("ocular_motility")->steps;
  realize(rig, "ocular_motility");  // step 1
  ASSERT_EQ(rig.goal("ocular_motility")->status, GoalStatus::Active);

  rig.patient_says("Could this be myasthenia gravis?");
  rig.sync();
  auto ds = rig.directives();
  ASSERT_FALSE(ds.empty());
  EXPECT_EQ(ds.front().kind, GoalKind::EducateUser);
  EXPECT_EQ(ds.front().goal_id.rfind("educate_", 0), 0u);
  EXPECT_NE(ds.front().instruction.find("autoimmune"), std::string::npos);
  // The exam is suspended, not dropped.
  EXPECT_EQ(rig.goal("ocular_motility")->status, GoalStatus::Active);

  auto educate = ds.front().goal_id;
  rig.say(educate, ds.front().instruction);
  rig.reply();
  rig.sync();
  EXPECT_EQ(rig.goal(educate)->status, GoalStatus::Satisfied);

  ds = rig.directives();
  ASSERT_FALSE(ds.empty());
  EXPECT_EQ(ds.front().goal_id, "ocular_motility");
  EXPECT_EQ(ds.front().instruction, steps[1].prompt);
}

TEST(PlannerFixtures, GoalRetainedUntilOmittedSlotEvidenced) {
  EncounterRig rig(mg());
  rig.sync();
  std::vector<GoalStatus> seen{rig.goal("bulbar_symptoms")->status};

  rig.say("bulbar_symptoms", "Have you had any trouble swallowing or chewing?");
  rig.sync();
  seen.push_back(rig.goal("bulbar_symptoms")->status);

  auto r = rig.reply();
  rig.sync();
  seen.push_back(rig.goal("bulbar_symptoms")->status);
  EXPECT_TRUE(rig.model().findings.count("dysphagia"));
  EXPECT_FALSE(rig.model().findings.count("chewing"));  // withheld on the compound question

  const auto* d = directive_for(rig.directives(), "bulbar_symptoms");
  ASSERT_NE(d, nullptr);
  EXPECT_NE(d->instruction.find("chew"), std::string::npos);
  EXPECT_EQ(d->instruction.find("swallow"), std::string::npos);

  rig.say("bulbar_symptoms", d->instruction);
  rig.reply();
  rig.sync();
  seen.push_back(rig.goal("bulbar_symptoms")->status);

  EXPECT_EQ(seen, (std::vector<GoalStatus>{GoalStatus::Pending, GoalStatus::Active, GoalStatus::Active,
                                           GoalStatus::Satisfied}));
  EXPECT_TRUE(rig.model().findings.count("chewing"));
}

TEST(PlannerFixtures, CourseCorrectionAddsDurationThenCapturesDrift) {
  EncounterRig rig(mg());
  rig.say("", "Hello, what brings you in today?");
  rig.reply();  // the opening reply is the chief concern, never a maneuver
  rig.sync();
  const auto* goal = rig.goal("arm_endurance");
  ASSERT_NE(goal, nullptr);
  EXPECT_FALSE(goal->constraint);

  rig.say("arm_endurance", goal->instruction);  // no duration stated
  auto first = rig.reply();
  ASSERT_TRUE(first.marker);
  EXPECT_LT(first.marker->at("duration_s").get<double>(), 30.0);
  EXPECT_FALSE(first.marker->value("findings", Json::array()).size());
  rig.sync();

  goal = rig.goal("arm_endurance");
  EXPECT_EQ(goal->status, GoalStatus::Active);
  ASSERT_TRUE(goal->constraint);
  EXPECT_EQ(goal->constraint->min_duration_s, 30);
  EXPECT_FALSE(rig.model().findings.count("arm_drift"));

  auto posted = directives_for(rig.frames(), "arm_endurance");
  ASSERT_FALSE(posted.empty());
  auto instruction = posted.back().payload.at("instruction").get<std::string>();
  EXPECT_NE(instruction.find("30 seconds"), std::string::npos) << instruction;

  rig.say("arm_endurance", instruction);
  auto second = rig.reply();
  ASSERT_TRUE(second.marker);
  EXPECT_GE(second.marker->at("duration_s").get<double>(), 30.0);
  rig.sync();
  EXPECT_EQ(rig.goal("arm_endurance")->status, GoalStatus::Satisfied);
  auto f = rig.model().findings.find("arm_drift");
  ASSERT_NE(f, rig.model().findings.end());
  EXPECT_EQ(f->second.source, session::EvidenceSource::Observed);
}

TEST(Planner, RedFlagScreeningComesFirst) {
  EncounterRig rig(mg());
  rig.sync();
  auto ds = rig.directives();
  ASSERT_FALSE(ds.empty());
  EXPECT_EQ(ds.front().goal_id, "screen_airway");
  for (std::size_t i = 1; i < ds.size(); ++i) EXPECT_LE(ds[i - 1].priority, ds[i].priority);
}

TEST(Planner, StalledGoalIsAbandoned) {
  EncounterRig rig(mg(), planner::PlannerOptions{2, 1});
  rig.sync();
  for (int i = 0; i < 2; ++i) {
    rig.say("fluctuation", "Tell me about your weekend.");
    rig.reply();
    rig.sync();
  }
  EXPECT_EQ(rig.goal("fluctuation")->status, GoalStatus::Abandoned);
  EXPECT_EQ(directive_for(rig.directives(), "fluctuation"), nullptr);
}

TEST(Planner, NoAbandonmentWhenDisabled) {
  EncounterRig rig(mg(), planner::PlannerOptions{0, 1});
  rig.sync();
  for (int i = 0; i < 5; ++i) {
    rig.say("fluctuation", "Tell me about your weekend.");
    rig.reply();
    rig.sync();
  }
  EXPECT_EQ(rig.goal("fluctuation")->status, GoalStatus::Active);
}

TEST(Planner, IngestRejectsGaps) {
  auto s = mg();
  planner::Planner p(s);
  session::EventFrame f;
  f.seq = 3;
  f.kind = FrameKind::PatientUtterance;
  f.payload = {{"text", "hi"}, {"end_of_turn", true}};
  std::vector<session::EventFrame> frames{f};
  try {
    p.ingest(frames);
    FAIL() << "expected NonContiguousDelta";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonContiguousDelta);
  }
}

TEST(Planner, DuplicateGoalRejected) {
  auto s = mg();
  auto model = planner::initial_model(*s);
  auto g = *model.find_goal("background");
  try {
    planner::inject_goal(model, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateGoal);
  }
}

TEST(Planner, CourseCorrectNeedsManeuverGoal) {
  auto s = mg();
  auto model = planner::initial_model(*s);
  session::EventFrame marker;
  marker.kind = FrameKind::ManeuverMarker;
  marker.payload = {{"maneuver", "arm_drift"}, {"duration_s", 5}};
  try {
    planner::course_correct(*model.find_goal("background"), marker);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotManeuverGoal);
  }
}

TEST(Planner, StatusNeverRegresses) {
  EncounterRig rig(mg());
  rig.sync();
  realize(rig, "elicit_diplopia");
  ASSERT_EQ(rig.goal("elicit_diplopia")->status, GoalStatus::Satisfied);
  for (int i = 0; i < 4; ++i) {
    rig.say("", "Anything else?");
    rig.reply();
    rig.sync();
  }
  EXPECT_EQ(rig.goal("elicit_diplopia")->status, GoalStatus::Satisfied);
}
