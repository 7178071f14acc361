#include "telesim/stats/score_table.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "telesim/common/error.hpp"

namespace telesim::stats {

ScoreTable::ScoreTable(std::vector<ScoreRow> rows) {
  for (auto& r : rows) add(std::move(r));
}

void ScoreTable::add(ScoreRow row) {
  if (!keys_.emplace(row.encounter_id, row.category).second)
    throw Error(ErrorCode::InvalidArgument,
                "duplicate row for (" + row.encounter_id + ", " + row.category + ")");
  rows_.push_back(std::move(row));
}

std::vector<ScoreRow> ScoreTable::category(std::string_view name) const {
  std::vector<ScoreRow> out;
  for (const auto& r : rows_)
    if (r.category == name) out.push_back(r);
  return out;
}

namespace {
template <class F>
std::vector<std::string> distinct(const std::vector<ScoreRow>& rows, F f) {
  std::set<std::string> s;
  for (const auto& r : rows) s.insert(f(r));
  return {s.begin(), s.end()};
}
}  // namespace

std::vector<std::string> ScoreTable::categories() const {
  return distinct(rows_, [](const ScoreRow& r) { return r.category; });
}
std::vector<std::string> ScoreTable::arms() const {
  return distinct(rows_, [](const ScoreRow& r) { return r.arm; });
}
std::vector<std::string> ScoreTable::scenarios() const {
  return distinct(rows_, [](const ScoreRow& r) { return r.scenario; });
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, p) : std::string("nan");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::Parse, "csv: unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_csv(const ScoreTable& table) {
  std::string out = "encounter_id,arm,scenario,actor,category,value\n";
  for (const auto& r : table.rows()) {
    out += csv_field(r.encounter_id) + ',' + csv_field(r.arm) + ',' + csv_field(r.scenario) + ',' +
           csv_field(r.actor) + ',' + csv_field(r.category) + ',' + format_double(r.value) + '\n';
  }
  return out;
}

ScoreTable score_table_from_csv(std::string_view csv) {
  auto rows = parse_csv(csv);
  const std::vector<std::string> header = {"encounter_id", "arm", "scenario", "actor", "category", "value"};
  if (rows.empty() || rows[0] != header)
    throw Error(ErrorCode::Parse, "score table: expected header encounter_id,arm,scenario,actor,category,value");
  ScoreTable t;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 6) throw RecordError(ErrorCode::Parse, i, "expected 6 fields");
    double v = 0;
    auto [p, ec] = std::from_chars(r[5].data(), r[5].data() + r[5].size(), v);
    if (ec != std::errc() || p != r[5].data() + r[5].size())
      throw RecordError(ErrorCode::Parse, i, "bad value '" + r[5] + "'");
    t.add({r[0], r[1], r[2], r[3], r[4], v});
  }
  return t;
}

}  // namespace telesim::stats
