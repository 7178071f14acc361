// Shared fixtures and independent oracles for the unit and acceptance tests.
#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "telesim/common/rng.hpp"
#include "telesim/patient/patient.hpp"
#include "telesim/patient/scenario.hpp"
#include "telesim/planner/planner.hpp"
#include "telesim/scoring/rubric.hpp"
#include "telesim/session/clock.hpp"
#include "telesim/session/session.hpp"
#include "telesim/stats/score_table.hpp"
#include "telesim/study/config.hpp"
#include "telesim/talker/talker.hpp"
#include "telesim/trace/trace.hpp"

namespace telesim::testing {

std::filesystem::path data_file(const std::string& relative);
const std::vector<std::string>& demo_templates();  // mg_demo, asthma_demo, rotator_cuff_demo
std::shared_ptr<const patient::ScenarioScript> demo_scenario(const std::string& id);
scoring::CaseRubric demo_rubric(const std::string& id);
/// Copy without scheduled patient questions, for fixtures that drive turns by hand.
std::shared_ptr<const patient::ScenarioScript> without_questions(const patient::ScenarioScript& s);

struct TempDir {
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::filesystem::path path;
};

/// Drives one encounter by hand: the test speaks for the talker, the
/// simulated patient answers, and the planner is synced at each boundary.
class EncounterRig {
 public:
  explicit EncounterRig(std::shared_ptr<const patient::ScenarioScript> scenario, planner::PlannerOptions options = {});

  void sync();
  /// One final chunk; `goal` is recorded as the realized directive when set.
  std::uint64_t say(const std::string& goal, const std::string& text);
  /// The simulated patient answers the last talker text (marker, then utterance).
  patient::PatientResponse reply(std::int64_t reply_ms = 4000);
  std::uint64_t patient_says(const std::string& text);
  std::uint64_t observe();  // FrameObservation of the currently visible signs

  std::vector<planner::Directive> directives() const { return planner_.directives(); }
  const planner::Goal* goal(const std::string& id) const { return planner_.model().find_goal(id); }
  const planner::EncounterModel& model() const { return planner_.model(); }
  session::Session& session() { return *session_; }
  std::vector<session::EventFrame> frames() const { return session_->frames_since(0); }

 private:
  std::shared_ptr<const patient::ScenarioScript> scenario_;
  std::shared_ptr<session::ManualClock> clock_;
  std::shared_ptr<session::Session> session_;
  planner::Planner planner_;
  patient::PatientState patient_;
  std::string last_talker_;
};

// ---- oracles ----

/// Kendall tau-b by direct pair counting, O(n^2).
double tau_b_bruteforce(const std::vector<double>& x, const std::vector<double>& y);

/// Solves (X'X) b = X'y through an explicit inverse of X'X.
Eigen::VectorXd normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Residual-variance covariance sigma^2 (X'X)^-1.
Eigen::MatrixXd normal_covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// ---- generators ----

/// A random but valid trace: every frame kind, arbitrary UTF-8 text, cites,
/// monotone timestamps, contiguous seqs.
trace::EncounterTrace random_trace(Rng& rng, std::size_t n_frames);

/// Trace with `supported` well-evidenced assertions and `unsupported`
/// assertions planted with one of several evidence defects.
struct PlantedTrace {
  trace::EncounterTrace trace;
  std::set<std::string> planted;    // assertion ids that must be flagged
  std::set<std::string> supported;  // assertion ids that must not be
};
PlantedTrace planted_audit_trace(Rng& rng, int supported, int unsupported);

/// Every token a probe pattern of the scenario could match (synonym groups
/// expanded); `*` terms are kept as prefixes ending in '*'.
std::set<std::string> probe_vocabulary(const patient::ScenarioScript& s);
/// A random question whose words avoid `banned`, built from `words`.
std::string random_probe(Rng& rng, const std::vector<std::string>& words);
bool token_banned(const std::string& word, const std::set<std::string>& banned);
std::vector<std::string> filler_words();

/// Talker script that asks every scripted question one at a time (twice for
/// facts released only on active probing), looks at the patient, guides
/// every maneuver with its full instruction, then gives the escalation,
/// reasoning and treatment statements.
talker::TalkerScript thorough_script(const patient::ScenarioScript& s);
Json thorough_script_json(const patient::ScenarioScript& s);

/// Study config document over the demo templates with one scenario alias
/// per (template, copy).
Json demo_config_json(const std::filesystem::path& dir, int copies_per_template, const std::vector<std::string>& actors,
                      const Json& backends, std::uint64_t seed = 7);

// ---- session fuzz ----

struct FuzzStats {
  std::size_t frames = 0;
  std::size_t barge_ins = 0;
  std::size_t max_accepted_after_barge_in = 0;  // chunks of the cut utterance logged after its barge-in
  bool seq_monotone = true;
  bool ts_monotone = true;
  bool replay_consistent = true;  // replayed turn state equals the session's
};
/// Random interleaving of patient speech, talker chunk streams, barge-ins
/// and other frames against a live session.
FuzzStats fuzz_session(std::uint64_t seed, std::size_t events, std::uint32_t grace);

}  // namespace telesim::testing
