// telesim: command-line front end for plans, batch runs, scoring and analysis.

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "telesim/common/error.hpp"
#include "telesim/patient/scenario.hpp"
#include "telesim/scoring/rubric.hpp"
#include "telesim/scoring/scoring.hpp"
#include "telesim/service/service.hpp"
#include "telesim/study/analysis.hpp"
#include "telesim/study/config.hpp"
#include "telesim/study/plan.hpp"
#include "telesim/study/runner.hpp"
#include "telesim/trace/audit.hpp"
#include "telesim/trace/trace.hpp"

using namespace telesim;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string arms;
  std::string out;
};

std::vector<Arm> parse_arms(const std::string& list) {
  std::vector<Arm> arms;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) arms.push_back(arm_from_string(item));
  return arms;
}

study::StudyConfig load_config(const Common& c) {
  if (c.config.empty()) throw Error(ErrorCode::InvalidArgument, "--config is required");
  auto config = study::load_study_config(c.config);
  if (c.seed) config.seed = *c.seed;
  if (!c.arms.empty()) config.arms = parse_arms(c.arms);
  return config;
}

study::StudyPlan plan_for(const study::StudyConfig& config) {
  auto plan = study::make_plan(config.seed, config.scenario_ids(), config.actors, config.replication, config.arms);
  auto problems = study::check_plan(plan);
  if (!problems.empty()) throw ValidationError(problems);
  return plan;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << text;
}

void print_plan_summary(const study::StudyPlan& plan) {
  std::map<Arm, int> per_arm;
  for (const auto& a : plan.assignments) ++per_arm[a.arm];
  std::cout << plan.assignments.size() << " encounters, " << plan.replication.size() << " replicated scenarios\n";
  for (const auto& [arm, n] : per_arm) std::cout << "  " << to_string(arm) << ": " << n << "\n";
}

int validate_scenario(const std::string& file, const std::string& rubric_file) {
  auto scenario = patient::load_scenario_file(file);
  std::cout << scenario.id << ": " << scenario.facts.size() << " facts, " << scenario.red_flags.size()
            << " red flags, " << scenario.maneuvers.size() << " maneuvers, " << scenario.unevoked_signs.size()
            << " signs, " << scenario.planner.goals.size() << " planner goals\n";
  if (!rubric_file.empty()) {
    auto rubric = scoring::load_rubric_file(rubric_file);
    if (rubric.scenario != scenario.id)
      throw Error(ErrorCode::ScenarioMismatch, "rubric is for '" + rubric.scenario + "'");
    std::cout << "rubric: " << rubric.items.size() << " items\n";
  }
  std::cout << "OK\n";
  return 0;
}

study::ScenarioStore& store_of(const study::StudyConfig& config) {
  static std::unique_ptr<study::ScenarioStore> store;
  if (!store) store = std::make_unique<study::ScenarioStore>(config);
  return *store;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated telehealth encounter studies: plans, batch runs, scoring, analysis, live service"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--config", c.config, "Study config file");
    sub->add_option("--seed", c.seed, "Override the config seed");
    sub->add_option("--arms", c.arms, "Comma-separated arm list");
    auto* o = sub->add_option("--out", c.out, "Output file or directory");
    if (out_required) o->required();
  };

  std::string scenario_file, rubric_file;
  auto* validate = app.add_subcommand("validate-scenario", "Check a scenario script (and optionally its rubric)");
  validate->add_option("file", scenario_file, "Scenario JSON")->required();
  validate->add_option("--rubric", rubric_file, "Case rubric JSON");

  auto* make_plan = app.add_subcommand("make-plan", "Build the randomized crossover plan");
  add_common(make_plan, false);

  bool sequential = false;
  auto* run = app.add_subcommand("run-study", "Run every planned encounter and grade it");
  add_common(run, true);
  run->add_flag("--sequential", sequential, "Run actors one after another");
  int live_port = 0;
  int live_timeout_s = 3600;
  run->add_option("--live-port", live_port, "Serve live sessions for live-backend arms on this port");
  run->add_option("--live-timeout", live_timeout_s, "Seconds to wait for each live encounter");

  std::vector<std::string> score_traces;
  std::string score_scenario;
  auto* score = app.add_subcommand("score", "Autograde traces against their case rubric");
  add_common(score, false);
  score->add_option("traces", score_traces, "Trace files")->required();
  score->add_option("--scenario", score_scenario, "Scenario alias (default: from the trace)");

  std::string records_dir;
  int bootstrap_n = 10000;
  double ci_level = 0.95;
  auto* analyze = app.add_subcommand("analyze", "Fits, contrasts, CIs, agreement, gap maps and audits");
  add_common(analyze, true);
  analyze->add_option("--records", records_dir, "run-study output directory")->required();
  auto* bn = analyze->add_option("--bootstrap-n", bootstrap_n, "Bootstrap resamples")->check(CLI::PositiveNumber);
  auto* cl = analyze->add_option("--ci-level", ci_level, "Confidence level")->check(CLI::Range(0.5, 0.9999));

  std::vector<std::string> audit_traces;
  bool audit_json = false;
  auto* audit = app.add_subcommand("audit", "List talker assertions not backed by observation");
  audit->add_option("traces", audit_traces, "Trace files")->required();
  audit->add_flag("--json", audit_json, "JSON output");

  std::string host = "127.0.0.1";
  int port = 8080;
  bool manual_clock = false;
  int pace_ms = 0;
  auto* serve = app.add_subcommand("serve", "Host live sessions over HTTP");
  add_common(serve, false);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_flag("--manual-clock", manual_clock, "Time advances only by talker chunks and client advance_ms");
  serve->add_option("--pace-ms", pace_ms, "Delay before each talker chunk");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return validate_scenario(scenario_file, rubric_file);

    if (*make_plan) {
      auto plan = plan_for(load_config(c));
      if (!c.out.empty()) write_file(c.out, study::to_json(plan).dump(2) + "\n");
      else std::cout << study::to_json(plan).dump(2) << "\n";
      print_plan_summary(plan);
      return 0;
    }

    if (*run) {
      auto config = load_config(c);
      if (sequential) config.parallel = false;
      auto plan = plan_for(config);
      fs::path out(c.out);
      write_file(out / "plan.json", study::to_json(plan).dump(2) + "\n");
      auto& store = store_of(config);
      std::ofstream log_file(out / "progress.log");
      std::mutex log_mu;
      study::RunContext ctx{&config, &store, out, {}, [&](const std::string& line) {
                              std::lock_guard lock(log_mu);
                              log_file << line << "\n";
                              log_file.flush();
                              std::cerr << line << "\n";
                            }};
      std::unique_ptr<service::Service> svc;
      httplib::Server server;
      std::thread server_thread;
      if (live_port > 0) {
        service::ServiceOptions so{out, config.encounter, config.backends, config.analysis.likert};
        svc = std::make_unique<service::Service>(std::make_shared<study::ScenarioStore>(config), so);
        svc->mount(server);
        ctx.live = svc->live_fulfiller(std::chrono::seconds(live_timeout_s));
        server_thread = std::thread([&] { server.listen(host, live_port); });
        std::cerr << "live sessions on port " << live_port << "; GET /queue lists waiting encounters\n";
      }
      int rc = 0;
      try {
        auto records = study::run_study(plan, ctx);
        std::map<std::string, int> status;
        for (const auto& r : records) ++status[std::string(study::to_string(r.status))];
        std::cout << records.size() << " records";
        for (const auto& [s, n] : status) std::cout << ", " << s << " " << n;
        std::cout << "\n";
      } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        rc = 2;
      }
      if (server_thread.joinable()) {
        server.stop();
        server_thread.join();
      }
      return rc;
    }

    if (*score) {
      auto config = load_config(c);
      auto& store = store_of(config);
      Json out = Json::array();
      for (const auto& file : score_traces) {
        auto trace = trace::read_trace_file(file);
        auto alias = score_scenario.empty() ? trace.metadata().scenario : score_scenario;
        const auto& rubric = store.rubric(alias);
        auto sheet = scoring::autograde(trace, rubric, fs::path(file).filename().string());
        auto s = scoring::aggregate(sheet, rubric, config.analysis.likert);
        std::cout << file << ": " << s.total << "/" << s.total_max << " (" << s.total_percent << "%)\n";
        for (auto d : scoring::kAllDomains)
          std::cout << "  " << to_string(d) << " " << s.domain_sum.at(d) << "/" << s.domain_max.at(d) << "\n";
        out.push_back(scoring::to_json(sheet));
      }
      if (!c.out.empty()) write_file(c.out, out.dump(2) + "\n");
      return 0;
    }

    if (*analyze) {
      auto config = load_config(c);
      if (!bn->empty()) config.analysis.bootstrap_n = bootstrap_n;
      if (!cl->empty()) config.analysis.ci_level = ci_level;
      auto& store = store_of(config);
      fs::path rec(records_dir);
      std::optional<study::StudyPlan> plan;
      if (fs::exists(rec / "plan.json")) {
        std::ifstream in(rec / "plan.json");
        plan = study::plan_from_json(Json::parse(in));
      }
      auto records = study::read_records(rec / "records.json");
      auto bundle = study::analyze(records, store, rec, c.out,
                                   study::analyze_options(config, plan ? &*plan : nullptr));
      for (const auto& [name, digest] : bundle.files) std::cout << digest << "  " << name << "\n";
      return 0;
    }

    if (*audit) {
      Json all = Json::array();
      for (const auto& file : audit_traces) {
        auto report = trace::audit(trace::read_trace_file(file));
        if (audit_json) {
          auto j = trace::to_json(report);
          j["file"] = file;
          all.push_back(j);
        } else {
          std::cout << "# " << file << "\n" << trace::to_table(report);
        }
      }
      if (audit_json) std::cout << all.dump(2) << "\n";
      return 0;
    }

    if (*serve) {
      auto config = load_config(c);
      service::ServiceOptions so;
      so.out_dir = c.out.empty() ? fs::path("live_out") : fs::path(c.out);
      so.encounter = config.encounter;
      so.backends = config.backends;
      so.likert = config.analysis.likert;
      so.manual_clock = manual_clock;
      so.pace_ms = pace_ms;
      service::Service svc(std::make_shared<study::ScenarioStore>(config), so);
      httplib::Server server;
      svc.mount(server);
      std::cerr << "listening on " << host << ":" << port << "\n";
      return server.listen(host, port) ? 0 : 1;
    }
  } catch (const ValidationError& e) {
    std::cerr << "invalid:\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
