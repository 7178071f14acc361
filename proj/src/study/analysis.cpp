#include "telesim/study/analysis.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "telesim/common/error.hpp"
#include "telesim/common/hash.hpp"
#include "telesim/common/rng.hpp"
#include "telesim/scoring/scoring.hpp"
#include "telesim/stats/stats.hpp"
#include "telesim/trace/audit.hpp"

namespace telesim::study {

namespace fs = std::filesystem;

namespace {

Json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

bool usable(const RunRecord& r) { return r.status != RunStatus::Failed && !r.sheet_path.empty(); }

bool fitted_category(const std::string& c) {
  return c.rfind("rubric:", 0) == 0 || c.rfind("telepaces_pct:", 0) == 0;
}

class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void put(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + (dir_ / name).string());
    out << content;
    files[name] = hex64(fnv1a64(content));
  }

  std::map<std::string, std::string> files;

 private:
  fs::path dir_;
};

}  // namespace

AnalyzeOptions analyze_options(const StudyConfig& config, const StudyPlan* plan) {
  AnalyzeOptions o;
  o.seed = config.seed;
  o.bootstrap_n = config.analysis.bootstrap_n;
  o.ci_level = config.analysis.ci_level;
  o.reference_arm = config.analysis.reference_arm;
  o.likert = config.analysis.likert;
  o.config_hash = config_hash(config);
  if (plan) o.replication = plan->replication;
  return o;
}

stats::ScoreTable build_score_table(const std::vector<RunRecord>& records, const ScenarioStore& store,
                                    const fs::path& records_dir, scoring::LikertMapping likert) {
  stats::ScoreTable table;
  for (const auto& r : records) {
    if (!usable(r)) continue;
    const auto& rubric = store.rubric(r.entry.scenario);
    // A rater's sheet submitted through the service supersedes the autograded one.
    auto manual = records_dir / "scores" / (r.encounter_id + ".json");
    auto sheet = scoring::sheet_from_json(read_json(fs::exists(manual) ? manual : records_dir / r.sheet_path), rubric);
    sheet.ref = {r.encounter_id, r.entry.scenario, std::string(to_string(r.entry.arm)), r.entry.actor};
    for (auto& row : scoring::score_rows(sheet, rubric, likert)) table.add(std::move(row));
  }
  return table;
}

ReportBundle analyze(const std::vector<RunRecord>& records, const ScenarioStore& store,
                     const fs::path& records_dir, const fs::path& out_dir, const AnalyzeOptions& options) {
  ReportBundle bundle;
  bundle.dir = out_dir;
  bundle.table = build_score_table(records, store, records_dir, options.likert);
  const auto& table = bundle.table;

  std::set<Arm> planned, present;
  for (const auto& r : records) {
    planned.insert(r.entry.arm);
    if (usable(r)) present.insert(r.entry.arm);
  }
  for (auto arm : planned)
    if (!present.count(arm))
      throw Error(ErrorCode::InsufficientData, "no usable record for arm " + std::string(to_string(arm)));
  if (present.empty()) throw Error(ErrorCode::InsufficientData, "no usable records");

  std::vector<std::string> arms;  // canonical arm order
  for (auto a : kAllArms)
    if (present.count(a)) arms.push_back(std::string(to_string(a)));
  std::string reference(to_string(options.reference_arm));
  if (!present.count(options.reference_arm)) reference = arms.front();

  Writer out(out_dir);
  out.put("score_table.csv", stats::to_csv(table));

  // Fits and pairwise contrasts.
  Json fits = Json::object();
  std::vector<std::string> categories;
  for (const auto& c : table.categories())
    if (fitted_category(c)) categories.push_back(c);
  for (const auto& cat : categories) {
    Json entry;
    try {
      auto fit = stats::fit_ols_fixed_effects(table, cat, reference);
      Json coef = Json::object(), se = Json::object();
      for (std::size_t i = 0; i < fit.names.size(); ++i) {
        coef[fit.names[i]] = fit.coefficients(static_cast<Eigen::Index>(i));
        se[fit.names[i]] = std::sqrt(fit.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
      }
      Json contrasts = Json::array();
      for (std::size_t i = 0; i < arms.size(); ++i)
        for (std::size_t k = i + 1; k < arms.size(); ++k) {
          auto c = stats::pairwise_contrast(fit, arms[i], arms[k]);
          contrasts.push_back({{"a", arms[i]}, {"b", arms[k]}, {"estimate", c.estimate},
                               {"standard_error", c.standard_error}, {"t", c.t},
                               {"p_value", c.p_value}, {"df", c.df}});
        }
      entry = {{"reference_arm", fit.reference_arm}, {"n", fit.n}, {"df", fit.df},
               {"sigma2", fit.sigma2}, {"coefficients", coef}, {"standard_errors", se},
               {"contrasts", contrasts}};
    } catch (const Error& e) {
      entry = {{"error", e.what()}};
    }
    fits[cat] = entry;
  }
  out.put("fits.json", fits.dump(2) + "\n");

  // Bootstrap CIs of per-arm means.
  std::ostringstream cis;
  cis << "category,arm,n,mean,lower,upper,level,resamples\n";
  for (const auto& cat : categories) {
    std::map<std::string, std::vector<double>> by_arm;
    for (const auto& row : table.category(cat)) by_arm[row.arm].push_back(row.value);
    for (const auto& arm : arms) {
      auto it = by_arm.find(arm);
      if (it == by_arm.end()) continue;
      auto seed = derive_seed(options.seed, fnv1a64(cat + "|" + arm));
      auto ci = stats::bootstrap_mean_ci(it->second, options.bootstrap_n, options.ci_level, seed);
      cis << stats::csv_field(cat) << ',' << arm << ',' << it->second.size() << ','
          << stats::format_double(ci.estimate) << ',' << stats::format_double(ci.lower) << ','
          << stats::format_double(ci.upper) << ',' << stats::format_double(ci.level) << ','
          << ci.n_resamples << '\n';
    }
  }
  out.put("cis.csv", cis.str());

  // Inter-rater agreement on replicated scenarios.
  auto replication = options.replication;
  if (replication.empty()) {
    std::map<std::string, std::set<std::string>> actors_of;
    for (const auto& row : table.rows()) actors_of[row.scenario].insert(row.actor);
    for (const auto& [sc, actors] : actors_of)
      if (actors.size() == 2) replication[sc] = {*actors.begin(), *actors.rbegin()};
  }
  std::ostringstream tau;
  tau << "category,tau_b,n,n_pairs\n";
  Json tau_note;
  if (!replication.empty()) {
    std::vector<std::string> scenarios;
    for (const auto& [sc, p] : replication) scenarios.push_back(sc);
    std::vector<std::string> tau_arms;
    for (const auto* a : {"human", "coclinician", "comparator_realtime"})
      if (std::find(arms.begin(), arms.end(), a) != arms.end()) tau_arms.push_back(a);
    try {
      for (const auto& [cat, pv] : stats::replication_pairs(table, scenarios, tau_arms, replication)) {
        tau << stats::csv_field(cat) << ',';
        try {
          auto t = stats::kendall_tau_b(pv.first, pv.second);
          tau << stats::format_double(t.tau_b) << ',' << pv.first.size() << ',' << t.n_pairs << '\n';
        } catch (const Error&) {
          tau << "NA," << pv.first.size() << ",NA\n";
        }
      }
    } catch (const Error& e) {
      tau_note = e.what();
    }
  }
  out.put("tau.csv", tau.str());

  // Gap maps against the reference arm.
  for (const auto& arm : arms) {
    if (arm == reference) continue;
    out.put("gap_" + reference + "_vs_" + arm + ".csv", stats::to_csv(stats::gap_map(table, reference, arm)));
  }

  // Evidence audits.
  Json per_encounter = Json::array();
  std::map<std::string, Json> per_arm;
  for (const auto& r : records) {
    if (!usable(r) || r.trace_path.empty()) continue;
    auto report = trace::audit(trace::read_trace_file(records_dir / r.trace_path));
    std::string arm(to_string(r.entry.arm));
    per_encounter.push_back({{"encounter_id", r.encounter_id}, {"arm", arm},
                             {"assertions", report.assertions},
                             {"contextual_completions", report.contextual_completions.size()},
                             {"untagged_utterances", report.untagged_utterances}});
    auto& a = per_arm[arm];
    if (a.is_null()) a = {{"encounters", 0}, {"assertions", 0}, {"contextual_completions", 0},
                          {"encounters_with_completions", 0}};
    a["encounters"] = a["encounters"].get<int>() + 1;
    a["assertions"] = a["assertions"].get<std::size_t>() + report.assertions;
    a["contextual_completions"] =
        a["contextual_completions"].get<std::size_t>() + report.contextual_completions.size();
    if (!report.contextual_completions.empty())
      a["encounters_with_completions"] = a["encounters_with_completions"].get<int>() + 1;
  }
  Json audits{{"arms", per_arm}, {"encounters", per_encounter}};
  out.put("audit.json", audits.dump(2) + "\n");

  std::size_t used = 0, repeated = 0, failed = 0;
  for (const auto& r : records) {
    used += usable(r);
    repeated += r.status == RunStatus::Repeated;
    failed += r.status == RunStatus::Failed;
  }
  bundle.files = out.files;
  bundle.manifest = {{"seed", options.seed},
                     {"config_hash", options.config_hash},
                     {"bootstrap_n", options.bootstrap_n},
                     {"ci_level", options.ci_level},
                     {"reference_arm", reference},
                     {"likert", scoring::to_string(options.likert)},
                     {"arms", arms},
                     {"records", {{"used", used}, {"repeated", repeated}, {"failed", failed}}},
                     {"universal_ratings", "proxy unless a rater sheet replaced the autograded one"},
                     {"files", bundle.files}};
  if (!tau_note.is_null()) bundle.manifest["tau_note"] = tau_note;
  Writer(out_dir).put("manifest.json", bundle.manifest.dump(2) + "\n");
  return bundle;
}

}  // namespace telesim::study
