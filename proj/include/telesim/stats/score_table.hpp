#pragma once

#include <filesystem>
#include <set>
#include <utility>
#include <string>
#include <string_view>
#include <vector>

namespace telesim::stats {

/// Long-format observation: one value per (encounter, category).
struct ScoreRow {
  std::string encounter_id;
  std::string arm;
  std::string scenario;
  std::string actor;
  std::string category;
  double value = 0;
  bool operator==(const ScoreRow&) const = default;
};

class ScoreTable {
 public:
  ScoreTable() = default;
  /// Throws Error(InvalidArgument) on a duplicate (encounter, category).
  explicit ScoreTable(std::vector<ScoreRow> rows);

  void add(ScoreRow row);
  const std::vector<ScoreRow>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }

  std::vector<ScoreRow> category(std::string_view name) const;
  std::vector<std::string> categories() const;  // sorted, unique
  std::vector<std::string> arms() const;
  std::vector<std::string> scenarios() const;

 private:
  std::vector<ScoreRow> rows_;
  std::set<std::pair<std::string, std::string>> keys_;
};

/// CSV with header encounter_id,arm,scenario,actor,category,value.
std::string to_csv(const ScoreTable& table);
ScoreTable score_table_from_csv(std::string_view csv);

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_field(const std::string& s);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace telesim::stats
