#include "telesim/scoring/scoring.hpp"

#include <cmath>
#include <set>

#include "telesim/common/error.hpp"

namespace telesim::scoring {

ScoreSheet autograde(const trace::EncounterTrace& trace, const CaseRubric& rubric,
                     const std::string& encounter_id) {
  if (trace.metadata().scenario != rubric.scenario)
    throw Error(ErrorCode::ScenarioMismatch, "trace scenario '" + trace.metadata().scenario +
                                                 "' does not match rubric '" + rubric.scenario + "'");
  ScoreSheet sheet;
  sheet.ref = {encounter_id.empty() ? trace.metadata().session : encounter_id, rubric.scenario,
               std::string(to_string(trace.metadata().arm)), trace.metadata().actor};
  sheet.rater = std::string(kAutograder);
  for (const auto& item : rubric.items) sheet.items[item.id] = item.rule.score(trace.frames());
  return sheet;
}

std::string_view to_string(LikertMapping m) {
  return m == LikertMapping::RatingOverFive ? "rating_over_5" : "zero_based";
}

LikertMapping parse_likert_mapping(std::string_view name) {
  if (name == "rating_over_5") return LikertMapping::RatingOverFive;
  if (name == "zero_based") return LikertMapping::ZeroBased;
  throw Error(ErrorCode::InvalidArgument, "unknown likert mapping '" + std::string(name) + "'");
}

double likert_percent(int rating, LikertMapping mapping) {
  if (rating < 1 || rating > 5)
    throw Error(ErrorCode::OutOfRange, "likert rating " + std::to_string(rating) + " outside 1..5");
  return mapping == LikertMapping::RatingOverFive ? 100.0 * rating / 5.0 : 100.0 * (rating - 1) / 4.0;
}

namespace {

void check_items(const ScoreSheet& sheet, const CaseRubric& rubric) {
  for (const auto& [id, score] : sheet.items) {
    if (!rubric.find(id)) throw Error(ErrorCode::UnknownItem, "unknown rubric item '" + id + "'");
    if (score < 0 || score > kItemMax)
      throw Error(ErrorCode::OutOfRange, "score " + std::to_string(score) + " for item '" + id + "' outside 0..2");
  }
  for (const auto& [id, rating] : sheet.universal) {
    if (!is_universal_criterion(id)) throw Error(ErrorCode::UnknownItem, "unknown universal criterion '" + id + "'");
    if (rating < 1 || rating > 5)
      throw Error(ErrorCode::OutOfRange, "rating " + std::to_string(rating) + " for '" + id + "' outside 1..5");
  }
}

std::string missing_items(const ScoreSheet& sheet, const CaseRubric& rubric) {
  std::string out;
  for (const auto& item : rubric.items)
    if (!sheet.items.count(item.id)) out += (out.empty() ? "" : ", ") + item.id;
  return out;
}

int parse_score(const std::string& s, std::size_t row) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    throw RecordError(ErrorCode::OutOfRange, row, "score '" + s + "' is not an integer");
  }
  if (pos != s.size()) throw RecordError(ErrorCode::OutOfRange, row, "score '" + s + "' is not an integer");
  return v;
}

std::vector<std::vector<std::string>> rows_with_header(std::string_view csv,
                                                       const std::vector<std::string>& header) {
  auto rows = stats::parse_csv(csv);
  if (rows.empty() || rows[0] != header) {
    std::string h;
    for (const auto& c : header) h += (h.empty() ? "" : ",") + c;
    throw Error(ErrorCode::Parse, "expected CSV header " + h);
  }
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].size() != header.size()) throw RecordError(ErrorCode::Parse, i, "wrong field count");
  return rows;
}

}  // namespace

EncounterScore aggregate(const ScoreSheet& sheet, const CaseRubric& rubric, LikertMapping mapping) {
  check_items(sheet, rubric);
  auto missing = missing_items(sheet, rubric);
  if (!missing.empty()) throw Error(ErrorCode::IncompleteSheet, "sheet is missing items: " + missing);

  EncounterScore s;
  for (Domain d : kAllDomains) {
    int sum = 0;
    auto items = rubric.items_in(d);
    for (const auto* item : items) sum += sheet.items.at(item->id);
    int max = rubric.max_score(d);
    s.domain_sum[d] = sum;
    s.domain_max[d] = max;
    s.domain_percent[d] = max > 0 ? 100.0 * sum / max : 0.0;
    s.item_mean[d] = items.empty() ? 0.0 : static_cast<double>(sum) / static_cast<double>(items.size());
    s.total += sum;
    s.total_max += max;
  }
  s.total_percent = s.total_max > 0 ? 100.0 * s.total / s.total_max : 0.0;
  for (const auto& [id, rating] : sheet.universal) s.universal_percent[id] = likert_percent(rating, mapping);
  return s;
}

ScoreSheet ingest_manual(std::string_view csv, const CaseRubric& rubric, const std::string& rater_id,
                         EncounterRef ref) {
  auto rows = rows_with_header(csv, {"encounter_id", "item_id", "score"});
  if (rows.size() < 2) throw Error(ErrorCode::MissingItems, "score sheet has no rows");
  ScoreSheet sheet;
  sheet.ref = std::move(ref);
  sheet.ref.encounter_id = rows[1][0];
  if (sheet.ref.scenario.empty()) sheet.ref.scenario = rubric.scenario;
  sheet.rater = "manual:" + rater_id;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r[0] != sheet.ref.encounter_id)
      throw RecordError(ErrorCode::InvalidArgument, i, "rows for more than one encounter");
    if (!rubric.find(r[1])) throw RecordError(ErrorCode::UnknownItem, i, "unknown rubric item '" + r[1] + "'");
    int v = parse_score(r[2], i);
    if (v < 0 || v > kItemMax) throw RecordError(ErrorCode::OutOfRange, i, "score " + r[2] + " outside 0..2");
    if (!sheet.items.emplace(r[1], v).second)
      throw RecordError(ErrorCode::InvalidArgument, i, "item '" + r[1] + "' scored twice");
  }
  auto missing = missing_items(sheet, rubric);
  if (!missing.empty()) throw Error(ErrorCode::MissingItems, "missing items: " + missing);
  return sheet;
}

void ingest_likert(std::string_view csv, ScoreSheet& sheet) {
  auto rows = rows_with_header(csv, {"encounter_id", "criterion_id", "rating"});
  std::map<std::string, int> ratings;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r[0] != sheet.ref.encounter_id)
      throw RecordError(ErrorCode::InvalidArgument, i, "rating for another encounter '" + r[0] + "'");
    if (!is_universal_criterion(r[1]))
      throw RecordError(ErrorCode::UnknownItem, i, "unknown universal criterion '" + r[1] + "'");
    int v = parse_score(r[2], i);
    if (v < 1 || v > 5) throw RecordError(ErrorCode::OutOfRange, i, "rating " + r[2] + " outside 1..5");
    if (!ratings.emplace(r[1], v).second)
      throw RecordError(ErrorCode::InvalidArgument, i, "criterion '" + r[1] + "' rated twice");
  }
  std::string missing;
  for (const auto& c : universal_criteria())
    if (!ratings.count(std::string(c.id))) missing += (missing.empty() ? "" : ", ") + std::string(c.id);
  if (!missing.empty()) throw Error(ErrorCode::MissingItems, "missing ratings: " + missing);
  sheet.universal = std::move(ratings);
}

Json to_json(const ScoreSheet& sheet) {
  return Json{{"encounter_id", sheet.ref.encounter_id},
              {"scenario", sheet.ref.scenario},
              {"arm", sheet.ref.arm},
              {"actor", sheet.ref.actor},
              {"rater", sheet.rater},
              {"items", sheet.items},
              {"universal", sheet.universal}};
}

ScoreSheet sheet_from_json(const Json& j, const CaseRubric& rubric) {
  ScoreSheet sheet;
  try {
    sheet.ref.encounter_id = j.at("encounter_id").get<std::string>();
    sheet.ref.scenario = j.value("scenario", rubric.scenario);
    sheet.ref.arm = j.value("arm", "");
    sheet.ref.actor = j.value("actor", "");
    sheet.rater = j.value("rater", "");
    sheet.items = j.at("items").get<std::map<std::string, int>>();
    if (j.contains("universal")) sheet.universal = j.at("universal").get<std::map<std::string, int>>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("score sheet: ") + e.what());
  }
  if (sheet.ref.scenario != rubric.scenario)
    throw Error(ErrorCode::ScenarioMismatch, "sheet scenario does not match rubric");
  check_items(sheet, rubric);
  auto missing = missing_items(sheet, rubric);
  if (!missing.empty()) throw Error(ErrorCode::MissingItems, "missing items: " + missing);
  if (!sheet.universal.empty() && sheet.universal.size() != universal_criteria().size())
    throw Error(ErrorCode::MissingItems, "universal ratings must cover all 14 criteria");
  return sheet;
}

std::vector<stats::ScoreRow> score_rows(const ScoreSheet& sheet, const CaseRubric& rubric,
                                        LikertMapping mapping) {
  auto score = aggregate(sheet, rubric, mapping);
  std::vector<stats::ScoreRow> rows;
  auto add = [&](std::string category, double value) {
    rows.push_back({sheet.ref.encounter_id, sheet.ref.arm, sheet.ref.scenario, sheet.ref.actor,
                    std::move(category), value});
  };
  for (Domain d : kAllDomains) add("rubric:" + std::string(to_string(d)), score.domain_percent.at(d));
  add("rubric:Total", score.total_percent);
  for (Domain d : kAllDomains) add("item_mean:" + std::string(to_string(d)), score.item_mean.at(d));
  for (const auto& [id, rating] : sheet.universal) {
    add("telepaces:" + id, rating);
    add("telepaces_pct:" + id, score.universal_percent.at(id));
  }
  return rows;
}

std::map<std::string, int> proxy_universal_ratings(const EncounterScore& score) {
  auto pct = [&](std::initializer_list<Domain> ds) {
    double sum = 0;
    for (Domain d : ds) sum += score.domain_percent.at(d);
    return sum / static_cast<double>(ds.size());
  };
  const std::map<std::string, double> basis = {
      {"U01", pct({Domain::HistoryTaking})},
      {"U02", pct({Domain::HistoryTaking})},
      {"U03", pct({Domain::ClinicalReasoning})},
      {"U04", pct({Domain::ClinicalReasoning, Domain::CommunicationCounseling})},
      {"U05", pct({Domain::TreatmentSteps, Domain::Triage})},
      {"U06", pct({Domain::HistoryTaking, Domain::RedFlags})},
      {"U07", pct({Domain::CommunicationCounseling})},
      {"U08", pct({Domain::CommunicationCounseling})},
      {"U09", pct({Domain::CommunicationCounseling, Domain::TreatmentSteps})},
      {"U10", pct({Domain::RedFlags, Domain::Triage})},
      {"U11", pct({Domain::ClinicalReasoning, Domain::TreatmentSteps})},
      {"U12", score.total_percent},
      {"U13", pct({Domain::CommunicationCounseling, Domain::ClinicalReasoning})},
      {"U14", pct({Domain::CommunicationCounseling, Domain::HistoryTaking})},
  };
  std::map<std::string, int> out;
  for (const auto& [id, p] : basis) out[id] = 1 + static_cast<int>(std::lround(4.0 * p / 100.0));
  return out;
}

}  // namespace telesim::scoring
