#include <gtest/gtest.h>

#include "support.hpp"
#include "telesim/common/error.hpp"
#include "telesim/scoring/scoring.hpp"
#include "telesim/study/encounter.hpp"

using namespace telesim;
using namespace telesim::testing;
using scoring::Domain;
using session::FrameKind;

namespace {

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

Json item(const std::string& id, Json full, Json partial = nullptr, bool non_negotiable = false) {
  Json rule{{"full", std::move(full)}};
  if (!partial.is_null()) rule["partial"] = std::move(partial);
  return {{"id", id}, {"text", id}, {"anchors", {{"0", "not done"}, {"1", "partial"}, {"2", "done"}}},
          {"rule", rule}, {"non_negotiable", non_negotiable}};
}

// A small depression case rubric with a self-harm screening item.
Json depression_rubric() {
  auto talker_says = [](std::vector<std::string> pats) { return Json{{"exists", {{"kind", "talker"}, {"text", pats}}}}; };
  return {{"schema", 1},
          {"scenario", "depression_inline"},
          {"synonyms", {{"self_harm", {"harm* yourself", "hurt* yourself", "suicid*", "end your life"}}}},
          {"domains",
           {{"HistoryTaking", {item("hx_mood", {{"exists", {{"finding", "low_mood"}}}}, talker_says({"mood", "feeling"}))}},
            {"PhysicalExam", {item("px_affect", {{"exists", {{"kind", "FrameObservation"}, {"finding", "flat_affect"}}}})}},
            {"ClinicalReasoning", {item("cr_depression", talker_says({"depress*"}))}},
            {"CommunicationCounseling", {item("cc_empathy", talker_says({"sorry to hear", "sounds hard"}))}},
            {"TreatmentSteps", {item("tx_followup", talker_says({"follow up", "therap*"}))}},
            {"Triage", {item("tr_safety_plan", talker_says({"crisis line", "988"}))}},
            {"RedFlags",
             {item("rf_self_harm",
                   {{"sequence",
                     {{{"kind", "talker"}, {"text", {"@self_harm"}}},
                      {{"kind", "patient"}, {"finding", "self_harm_ideation"}},
                      {{"cites", "self_harm_ideation"}}}}},
                   talker_says({"@self_harm"}), true)}}}}};
}

trace::EncounterTrace depression_trace(bool probe_self_harm) {
  std::vector<session::EventFrame> frames;
  auto push = [&](FrameKind k, Json p) {
    session::EventFrame f;
    f.seq = frames.size();
    f.ts_ms = static_cast<std::int64_t>(frames.size()) * 1000;
    f.kind = k;
    f.payload = std::move(p);
    frames.push_back(f);
  };
  std::int64_t u = 0;
  auto talker = [&](const std::string& text, Json cites = Json::array()) {
    Json p{{"text", text}, {"utterance", u++}, {"final", true}};
    if (!cites.empty()) p["cites"] = cites;
    push(FrameKind::TalkerUtteranceChunk, p);
  };
  talker("How has your mood been lately?");
  push(FrameKind::PatientUtterance, {{"text", "I've been feeling down for months."}, {"end_of_turn", true}, {"findings", {"low_mood"}}});
  talker("I'm sorry to hear that. Let's plan a follow up with therapy.");
  if (probe_self_harm) {
    talker("Have you had any thoughts of harming yourself?");
    push(FrameKind::PatientUtterance,
         {{"text", "Sometimes I think about it."}, {"end_of_turn", true}, {"findings", {"self_harm_ideation"}}});
    talker("Thank you for telling me; that matters.",
           {session::to_json(session::Cite{"self_harm_ideation", session::EvidenceSource::PatientReported, frames.size() - 1})});
  }
  return trace::EncounterTrace({"depression_inline", Arm::Human, "actor", 0, "s"}, frames);
}

}  // namespace

TEST(Autograde, UnprobedSelfHarmScoresZero) {
  auto rubric = scoring::parse_rubric(depression_rubric());
  auto skipped = scoring::autograde(depression_trace(false), rubric, "e1");
  EXPECT_EQ(skipped.items.at("rf_self_harm"), 0);
  EXPECT_EQ(skipped.items.at("hx_mood"), 2);
  auto screened = scoring::autograde(depression_trace(true), rubric, "e2");
  EXPECT_EQ(screened.items.at("rf_self_harm"), 2);
  EXPECT_EQ(screened.rater, std::string(scoring::kAutograder));
}

TEST(Autograde, EmptyTraceScoresZero) {
  for (const auto& id : demo_templates()) {
    auto rubric = demo_rubric(id);
    trace::EncounterTrace empty({id, Arm::Human, "a", 0, "s"}, {});
    auto sheet = scoring::autograde(empty, rubric);
    ASSERT_EQ(sheet.items.size(), rubric.items.size());
    for (const auto& [item, score] : sheet.items) EXPECT_EQ(score, 0) << item;
  }
}

TEST(Autograde, ScenarioMismatch) {
  auto rubric = demo_rubric("mg_demo");
  trace::EncounterTrace t({"asthma_demo", Arm::Human, "a", 0, "s"}, {});
  EXPECT_EQ(code_of([&] { scoring::autograde(t, rubric); }), ErrorCode::ScenarioMismatch);
}

TEST(Autograde, ThoroughScriptEarnsEveryNonNegotiable) {
  study::EncounterOptions options;
  for (const auto& id : demo_templates()) {
    auto s = demo_scenario(id);
    auto rubric = demo_rubric(id);
    auto backend = std::make_shared<talker::ScriptedBackend>(thorough_script(*s));
    auto enc = study::simulate_encounter(s, Arm::CoclinicianNoPlanner, "actor", backend, options);
    auto sheet = scoring::autograde(enc.trace, rubric);
    for (const auto& it : rubric.items)
      if (it.non_negotiable) EXPECT_EQ(sheet.items.at(it.id), 2) << id << ": " << it.id;
  }
}

TEST(Autograde, Deterministic) {
  study::EncounterOptions options;
  auto s = demo_scenario("mg_demo");
  auto backend = std::make_shared<talker::ScriptedBackend>(thorough_script(*s));
  auto a = study::simulate_encounter(s, Arm::Coclinician, "p", backend, options);
  auto b = study::simulate_encounter(s, Arm::Coclinician, "p", backend, options);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(scoring::autograde(a.trace, demo_rubric("mg_demo")), scoring::autograde(b.trace, demo_rubric("mg_demo")));
}

TEST(Aggregate, DomainSumsAndPercents) {
  auto rubric = scoring::parse_rubric(depression_rubric());
  // Give HistoryTaking three items to hit the [2,1,0] case.
  auto doc = depression_rubric();
  doc["domains"]["HistoryTaking"].push_back(item("hx_sleep", {{"exists", {{"finding", "insomnia"}}}}));
  doc["domains"]["HistoryTaking"].push_back(item("hx_appetite", {{"exists", {{"finding", "appetite"}}}}));
  rubric = scoring::parse_rubric(doc);
  scoring::ScoreSheet sheet;
  for (const auto& it : rubric.items) sheet.items[it.id] = 2;
  sheet.items["hx_mood"] = 2;
  sheet.items["hx_sleep"] = 1;
  sheet.items["hx_appetite"] = 0;
  auto s = scoring::aggregate(sheet, rubric);
  EXPECT_EQ(s.domain_sum.at(Domain::HistoryTaking), 3);
  EXPECT_DOUBLE_EQ(s.domain_percent.at(Domain::HistoryTaking), 50.0);
  int sum = 0;
  for (auto d : scoring::kAllDomains) sum += s.domain_sum.at(d);
  EXPECT_EQ(s.total, sum);
  EXPECT_EQ(s.total_max, 18);

  for (auto& [k, v] : sheet.items) v = 2;
  EXPECT_DOUBLE_EQ(scoring::aggregate(sheet, rubric).total_percent, 100.0);

  auto incomplete = sheet;
  incomplete.items.erase("hx_sleep");
  EXPECT_EQ(code_of([&] { scoring::aggregate(incomplete, rubric); }), ErrorCode::IncompleteSheet);
  auto unknown = sheet;
  unknown.items["nope"] = 1;
  EXPECT_EQ(code_of([&] { scoring::aggregate(unknown, rubric); }), ErrorCode::UnknownItem);
  auto bad = sheet;
  bad.items["hx_sleep"] = 3;
  EXPECT_EQ(code_of([&] { scoring::aggregate(bad, rubric); }), ErrorCode::OutOfRange);
}

TEST(Likert, Mappings) {
  EXPECT_DOUBLE_EQ(scoring::likert_percent(4), 80.0);
  EXPECT_DOUBLE_EQ(scoring::likert_percent(5), 100.0);
  EXPECT_DOUBLE_EQ(scoring::likert_percent(1, scoring::LikertMapping::ZeroBased), 0.0);
  EXPECT_DOUBLE_EQ(scoring::likert_percent(4, scoring::LikertMapping::ZeroBased), 75.0);
  EXPECT_EQ(code_of([] { scoring::likert_percent(0); }), ErrorCode::OutOfRange);
  EXPECT_EQ(code_of([] { scoring::likert_percent(6); }), ErrorCode::OutOfRange);
  EXPECT_EQ(scoring::parse_likert_mapping("rating_over_5"), scoring::LikertMapping::RatingOverFive);
  EXPECT_EQ(scoring::parse_likert_mapping("zero_based"), scoring::LikertMapping::ZeroBased);
}

TEST(Sheets, JsonRoundTripAndRows) {
  auto rubric = demo_rubric("mg_demo");
  scoring::ScoreSheet sheet;
  sheet.ref = {"e1", "mg_demo", "human", "actor01"};
  sheet.rater = "manual:r1";
  for (const auto& it : rubric.items) sheet.items[it.id] = 1;
  for (const auto& c : scoring::universal_criteria()) sheet.universal[std::string(c.id)] = 4;
  auto back = scoring::sheet_from_json(scoring::to_json(sheet), rubric);
  EXPECT_EQ(back, sheet);

  auto rows = scoring::score_rows(sheet, rubric);
  std::set<std::string> cats;
  for (const auto& r : rows) cats.insert(r.category);
  EXPECT_TRUE(cats.count("rubric:Total"));
  for (auto d : scoring::kAllDomains) {
    EXPECT_TRUE(cats.count("rubric:" + std::string(to_string(d))));
    EXPECT_TRUE(cats.count("item_mean:" + std::string(to_string(d))));
  }
  int telepaces = 0;
  for (const auto& c : cats) telepaces += c.rfind("telepaces_pct:", 0) == 0;
  EXPECT_EQ(telepaces, 14);
}

TEST(Sheets, ManualCsvIngest) {
  auto rubric = demo_rubric("asthma_demo");
  std::string csv = "encounter_id,item_id,score\n";
  for (const auto& it : rubric.items) csv += "e9," + it.id + ",2\n";
  auto sheet = scoring::ingest_manual(csv, rubric, "r7");
  EXPECT_EQ(sheet.rater, "manual:r7");
  EXPECT_DOUBLE_EQ(scoring::aggregate(sheet, rubric).total_percent, 100.0);
  std::string likert = "encounter_id,criterion_id,rating\n";
  likert += "e9," + std::string(scoring::universal_criteria()[0].id) + ",3\n";
  EXPECT_EQ(code_of([&] { scoring::ingest_likert(likert, sheet); }), ErrorCode::MissingItems);
  for (std::size_t i = 1; i < scoring::universal_criteria().size(); ++i)
    likert += "e9," + std::string(scoring::universal_criteria()[i].id) + ",3\n";
  scoring::ingest_likert(likert, sheet);
  EXPECT_EQ(sheet.universal.size(), 14u);
  EXPECT_EQ(code_of([&] { scoring::ingest_manual("encounter_id,item_id,score\ne9,bogus,1\n", rubric, "r"); }),
            ErrorCode::UnknownItem);
}

TEST(Sheets, ProxyRatingsInRange) {
  scoring::EncounterScore score;
  for (auto d : scoring::kAllDomains) score.domain_percent[d] = 37.5;
  score.total_percent = 37.5;
  auto proxy = scoring::proxy_universal_ratings(score);
  EXPECT_EQ(proxy.size(), 14u);
  for (const auto& [k, v] : proxy) {
    EXPECT_GE(v, 1);
    EXPECT_LE(v, 5);
  }
}

TEST(Rubrics, DemoRubricsParseAndInvalidOnesAreRejected) {
  for (const auto& id : demo_templates()) {
    auto r = demo_rubric(id);
    EXPECT_EQ(r.scenario, id);
    for (auto d : scoring::kAllDomains) EXPECT_FALSE(r.items_in(d).empty());
  }
  auto doc = depression_rubric();
  doc["domains"].erase("Triage");
  doc["domains"]["Bogus"] = Json::array();
  try {
    scoring::parse_rubric(doc);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_GE(e.violations().size(), 2u);
  }
}
