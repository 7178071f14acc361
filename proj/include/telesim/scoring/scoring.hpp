#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "telesim/common/json.hpp"
#include "telesim/scoring/rubric.hpp"
#include "telesim/stats/score_table.hpp"
#include "telesim/trace/trace.hpp"

namespace telesim::scoring {

struct EncounterRef {
  std::string encounter_id;
  std::string scenario;
  std::string arm;
  std::string actor;
  bool operator==(const EncounterRef&) const = default;
};

struct ScoreSheet {
  EncounterRef ref;
  std::map<std::string, int> items;      // item id -> 0..2
  std::map<std::string, int> universal;  // criterion id -> 1..5, optional
  std::string rater;                     // "autograder" or "manual:<id>"
  bool operator==(const ScoreSheet&) const = default;
};

/// Deterministic. Throws Error(ScenarioMismatch) when trace and rubric
/// disagree on the scenario.
ScoreSheet autograde(const trace::EncounterTrace& trace, const CaseRubric& rubric,
                     const std::string& encounter_id = {});

enum class LikertMapping {
  RatingOverFive,  // 100 * r / 5
  ZeroBased,       // 100 * (r - 1) / 4
};
std::string_view to_string(LikertMapping m);
LikertMapping parse_likert_mapping(std::string_view name);

/// Throws Error(OutOfRange) unless rating is 1..5.
double likert_percent(int rating, LikertMapping mapping = LikertMapping::RatingOverFive);

struct EncounterScore {
  std::map<Domain, int> domain_sum;
  std::map<Domain, int> domain_max;
  std::map<Domain, double> domain_percent;
  std::map<Domain, double> item_mean;  // mean item score, 0..2
  int total = 0;
  int total_max = 0;
  double total_percent = 0;
  std::map<std::string, double> universal_percent;
};

/// Throws Error(IncompleteSheet) naming missing items, Error(UnknownItem)
/// or Error(OutOfRange) for bad entries.
EncounterScore aggregate(const ScoreSheet& sheet, const CaseRubric& rubric,
                         LikertMapping mapping = LikertMapping::RatingOverFive);

/// CSV encounter_id,item_id,score for a single encounter.
ScoreSheet ingest_manual(std::string_view csv, const CaseRubric& rubric, const std::string& rater_id,
                         EncounterRef ref = {});
/// CSV encounter_id,criterion_id,rating; adds the universal ratings to sheet.
void ingest_likert(std::string_view csv, ScoreSheet& sheet);

Json to_json(const ScoreSheet& sheet);
/// Validates against the rubric like ingest_manual does.
ScoreSheet sheet_from_json(const Json& j, const CaseRubric& rubric);

/// Long-format rows: rubric:<Domain> and rubric:Total (percent),
/// item_mean:<Domain> (0..2), and for rated sheets telepaces:<id> (raw
/// rating) and telepaces_pct:<id>.
std::vector<stats::ScoreRow> score_rows(const ScoreSheet& sheet, const CaseRubric& rubric,
                                        LikertMapping mapping = LikertMapping::RatingOverFive);

/// Stand-in universal ratings for unattended batch runs, derived from the
/// case-rubric domain percents. Not a substitute for human raters.
std::map<std::string, int> proxy_universal_ratings(const EncounterScore& score);

inline constexpr std::string_view kAutograder = "autograder";

}  // namespace telesim::scoring
