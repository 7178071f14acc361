#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>

#include <unistd.h>

#include "telesim/common/error.hpp"
#include "telesim/scoring/rubric.hpp"
#include "telesim/session/turn_state.hpp"
#include "telesim/study/encounter.hpp"
#include "telesim/trace/audit.hpp"

namespace telesim::testing {

namespace fs = std::filesystem;
using session::Cite;
using session::EvidenceSource;
using session::EventFrame;
using session::FrameKind;

fs::path data_file(const std::string& relative) { return fs::path(TELESIM_DATA_DIR) / relative; }

const std::vector<std::string>& demo_templates() {
  static const std::vector<std::string> ids{"mg_demo", "asthma_demo", "rotator_cuff_demo"};
  return ids;
}

std::shared_ptr<const patient::ScenarioScript> demo_scenario(const std::string& id) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const patient::ScenarioScript>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[id];
  if (!slot)
    slot = std::make_shared<const patient::ScenarioScript>(
        patient::load_scenario_file(data_file("scenarios/" + id + ".json")));
  return slot;
}

scoring::CaseRubric demo_rubric(const std::string& id) {
  return scoring::load_rubric_file(data_file("rubrics/" + id + ".json"));
}

std::shared_ptr<const patient::ScenarioScript> without_questions(const patient::ScenarioScript& s) {
  auto copy = std::make_shared<patient::ScenarioScript>(s);
  copy->patient_questions.clear();
  return copy;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path = fs::temp_directory_path() /
         ("telesim-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
  fs::remove_all(path);
  fs::create_directories(path);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path, ec);
}

// ---- rig ----

EncounterRig::EncounterRig(std::shared_ptr<const patient::ScenarioScript> scenario, planner::PlannerOptions options)
    : scenario_(std::move(scenario)),
      clock_(std::make_shared<session::ManualClock>(0)),
      session_(std::make_shared<session::Session>(session::SessionId{"rig"}, clock_)),
      planner_(scenario_, options),
      patient_(scenario_) {
  session::SessionConfig cfg;
  cfg.scenario_id = scenario_->id;
  cfg.arm = Arm::Coclinician;
  cfg.actor_id = "rig";
  session_->open(cfg);
}

void EncounterRig::sync() {
  auto out = planner_.ingest(session_->frames_since(planner_.next_seq()));
  if (!out.empty()) session_->post_at_turn_boundary(std::move(out));
}

std::uint64_t EncounterRig::say(const std::string& goal, const std::string& text) {
  clock_->advance(1500);
  Json p{{"text", text}, {"utterance", session_->next_utterance_id()}, {"final", true}};
  if (!goal.empty()) p["directive"] = goal;
  last_talker_ = text;
  return session_->submit(FrameKind::TalkerUtteranceChunk, p);
}

patient::PatientResponse EncounterRig::reply(std::int64_t reply_ms) {
  auto r = patient::respond(last_talker_, patient_);
  clock_->advance(reply_ms);
  if (r.marker) {
    clock_->advance(1000 * r.marker->value("duration_s", std::int64_t{0}));
    session_->submit(FrameKind::ManeuverMarker, *r.marker);
  }
  session_->submit(FrameKind::PatientUtterance, r.utterance);
  return r;
}

std::uint64_t EncounterRig::patient_says(const std::string& text) {
  clock_->advance(3000);
  Json findings = patient::extract_findings(text, *scenario_);
  return session_->submit(FrameKind::PatientUtterance, Json{{"text", text}, {"end_of_turn", true}, {"findings", findings}});
}

std::uint64_t EncounterRig::observe() {
  return session_->submit(FrameKind::FrameObservation, study::observe_signs(*scenario_, session_->elapsed_ms()));
}

// ---- oracles ----

double tau_b_bruteforce(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double concordant = 0, discordant = 0, tied_x = 0, tied_y = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      ++pairs;
      double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0) ++tied_x;
      if (dy == 0) ++tied_y;
      if (dx == 0 || dy == 0) continue;
      ((dx > 0) == (dy > 0) ? concordant : discordant) += 1;
    }
  return (concordant - discordant) / std::sqrt((pairs - tied_x) * (pairs - tied_y));
}

Eigen::VectorXd normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::MatrixXd xtx = x.transpose() * x;
  return xtx.inverse() * (x.transpose() * y);
}

Eigen::MatrixXd normal_covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::VectorXd b = normal_equations(x, y);
  Eigen::VectorXd r = y - x * b;
  double s2 = r.squaredNorm() / static_cast<double>(x.rows() - x.cols());
  return s2 * (x.transpose() * x).inverse();
}

// ---- generators ----

namespace {

std::string random_text(Rng& rng) {
  static const std::vector<std::string> pieces{
      "a",  "b",   "Z", " ", " ", "?", ".", ",", "\"", "\\", "/",  "\n", "\t", "é", "ß", "中", "文",
      "✓", "🙂", "0", "9", "-", "'", "{", "}", "[", "]", "\u0001", "\u007f", "null", "true"};
  std::string s;
  auto n = bounded(rng, 24);
  for (std::uint64_t i = 0; i < n; ++i) s += pieces[bounded(rng, pieces.size())];
  return s;
}

std::string random_id(Rng& rng) {
  static const std::vector<std::string> ids{"diplopia", "ptosis", "wheeze", "arm_drift", "pain", "x", "é_id"};
  return ids[bounded(rng, ids.size())];
}

Json random_ids(Rng& rng) {
  Json a = Json::array();
  auto n = bounded(rng, 3);
  for (std::uint64_t i = 0; i < n; ++i) a.push_back(random_id(rng));
  return a;
}

Json random_payload(Rng& rng, FrameKind kind, std::uint64_t seq) {
  switch (kind) {
    case FrameKind::PatientUtterance: {
      Json p{{"text", random_text(rng)}, {"end_of_turn", bounded(rng, 2) == 1}};
      if (bounded(rng, 2)) p["findings"] = random_ids(rng);
      return p;
    }
    case FrameKind::TalkerUtteranceChunk: {
      Json p{{"text", random_text(rng)}, {"utterance", bounded(rng, 50)}, {"final", bounded(rng, 2) == 1}};
      if (bounded(rng, 2)) p["directive"] = "goal_" + std::to_string(bounded(rng, 5));
      if (bounded(rng, 2)) {
        Json cites = Json::array();
        auto n = 1 + bounded(rng, 3);
        for (std::uint64_t i = 0; i < n; ++i) {
          Cite c{random_id(rng), static_cast<EvidenceSource>(bounded(rng, 3)), std::nullopt};
          if (bounded(rng, 2) && seq > 0) c.frame = bounded(rng, seq);
          cites.push_back(session::to_json(c));
        }
        p["cites"] = cites;
      }
      return p;
    }
    case FrameKind::BargeIn:
      return Json::object();
    case FrameKind::FrameCaptureRequest:
      return bounded(rng, 2) ? Json::object() : Json{{"reason", random_text(rng)}};
    case FrameKind::FrameObservation: {
      Json p{{"signs", random_ids(rng)}};
      if (bounded(rng, 2) && seq > 0) p["request"] = bounded(rng, seq);
      return p;
    }
    case FrameKind::DirectiveInjected:
      return Json{{"goal_id", random_id(rng)}, {"goal_kind", "elicit_history"}, {"instruction", random_text(rng)},
                  {"priority", static_cast<int>(bounded(rng, 6))}, {"cites", Json::array()}};
    case FrameKind::ManeuverMarker:
      return Json{{"maneuver", random_id(rng)}, {"duration_s", uniform01(rng) * 90.0},
                  {"findings", random_ids(rng)}, {"outcome", bounded(rng, 2) ? "performed" : "incorrect"}};
    case FrameKind::GoalStateChange:
      return Json{{"goal_id", random_id(rng)}, {"from", "pending"}, {"to", "active"}};
    case FrameKind::SessionControl:
      return Json{{"action", bounded(rng, 2) ? "close" : "note"}, {"reason", random_text(rng)}};
  }
  return Json::object();
}

}  // namespace

trace::EncounterTrace random_trace(Rng& rng, std::size_t n_frames) {
  trace::TraceMetadata meta;
  meta.scenario = "sc_" + std::to_string(bounded(rng, 100));
  meta.arm = kAllArms[bounded(rng, kAllArms.size())];
  meta.actor = random_text(rng);
  meta.started_at_ms = static_cast<std::int64_t>(bounded(rng, 1'000'000'000));
  meta.session = "s-" + std::to_string(rng());
  std::vector<EventFrame> frames;
  std::int64_t ts = 0;
  for (std::size_t i = 0; i < n_frames; ++i) {
    EventFrame f;
    f.seq = i;
    ts += static_cast<std::int64_t>(bounded(rng, 5000));
    f.ts_ms = ts;
    f.kind = static_cast<FrameKind>(bounded(rng, session::kFrameKindCount));
    f.payload = random_payload(rng, f.kind, i);
    f.truncated = f.kind == FrameKind::TalkerUtteranceChunk && bounded(rng, 4) == 0;
    frames.push_back(std::move(f));
  }
  return trace::EncounterTrace(std::move(meta), std::move(frames));
}

PlantedTrace planted_audit_trace(Rng& rng, int supported, int unsupported) {
  PlantedTrace out;
  std::vector<EventFrame> frames;
  std::int64_t ts = 0;
  auto push = [&](FrameKind kind, Json payload) {
    EventFrame f;
    f.seq = frames.size();
    ts += 1 + static_cast<std::int64_t>(bounded(rng, 3000));
    f.ts_ms = ts;
    f.kind = kind;
    f.payload = std::move(payload);
    frames.push_back(f);
    return f.seq;
  };
  struct Evidence {
    std::uint64_t seq;
    EvidenceSource source;
    std::string finding;
  };
  std::vector<Evidence> evidence;
  int n_finding = 0;
  auto add_evidence = [&] {
    auto finding = "f" + std::to_string(n_finding++);
    switch (bounded(rng, 3)) {
      case 0:
        evidence.push_back({push(FrameKind::PatientUtterance, {{"text", "yes " + finding}, {"end_of_turn", true},
                                                               {"findings", {finding}}}),
                            EvidenceSource::PatientReported, finding});
        break;
      case 1:
        evidence.push_back({push(FrameKind::FrameObservation, {{"signs", {finding}}}), EvidenceSource::Observed, finding});
        break;
      default:
        evidence.push_back({push(FrameKind::ManeuverMarker, {{"maneuver", "m"}, {"duration_s", 10}, {"findings", {finding}}}),
                            EvidenceSource::Observed, finding});
    }
  };
  add_evidence();

  std::vector<bool> plan(static_cast<std::size_t>(supported), false);
  plan.insert(plan.end(), static_cast<std::size_t>(unsupported), true);
  for (std::size_t i = plan.size(); i > 1; --i) std::swap(plan[i - 1], plan[bounded(rng, i)]);

  std::int64_t utterance = 0;
  for (bool bad : plan) {
    // Background noise: more evidence, uncited talk, planner chatter.
    auto extra = bounded(rng, 3);
    for (std::uint64_t k = 0; k < extra; ++k) {
      switch (bounded(rng, 3)) {
        case 0: add_evidence(); break;
        case 1: push(FrameKind::TalkerUtteranceChunk, {{"text", "Okay."}, {"utterance", utterance++}, {"final", true}}); break;
        default: push(FrameKind::DirectiveInjected, {{"goal_id", "g"}, {"goal_kind", "elicit_history"}, {"instruction", "ask"}, {"priority", 3}});
      }
    }
    const auto chunk_seq = static_cast<std::uint64_t>(frames.size());
    Json cites = Json::array();
    auto good_cite = [&] {
      const auto& e = evidence[bounded(rng, evidence.size())];
      return session::to_json(Cite{e.finding, e.source, e.seq});
    };
    auto n_good = bad ? bounded(rng, 3) : 1 + bounded(rng, 3);
    for (std::uint64_t k = 0; k < n_good; ++k) cites.push_back(good_cite());
    if (bad) {
      const auto& e = evidence[bounded(rng, evidence.size())];
      Cite c{e.finding, e.source, e.seq};
      switch (bounded(rng, 6)) {
        case 0:  // inferred
          c.source = EvidenceSource::Inferred;
          if (bounded(rng, 2)) c.frame.reset();
          break;
        case 1:  // no frame at all
          c.frame.reset();
          break;
        case 2:  // points forward
          c.frame = chunk_seq + bounded(rng, 5);
          break;
        case 3:  // wrong evidence class
          c.source = e.source == EvidenceSource::PatientReported ? EvidenceSource::Observed : EvidenceSource::PatientReported;
          break;
        case 4:  // frame does not carry the finding
          c.finding = "absent_" + std::to_string(bounded(rng, 1000));
          break;
        default:  // frame is not evidence at all
          c.source = EvidenceSource::Observed;
          c.frame = chunk_seq + 100000;
      }
      cites.insert(cites.begin() + static_cast<std::ptrdiff_t>(bounded(rng, cites.size() + 1)), session::to_json(c));
    }
    auto seq = push(FrameKind::TalkerUtteranceChunk,
                    {{"text", bad ? "Your exam looks normal." : "You mentioned that."}, {"utterance", utterance++},
                     {"final", true}, {"cites", cites}});
    (bad ? out.planted : out.supported).insert(trace::assertion_id(seq));
  }
  trace::TraceMetadata meta{"planted", Arm::ComparatorRealtime, "fuzz", 0, "planted"};
  out.trace = trace::EncounterTrace(std::move(meta), std::move(frames));
  return out;
}

namespace {

std::vector<std::string> words_of(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char ch : s) {
    if (std::isalnum(ch) || ch == '*' || ch == '@' || ch == '_' || ch >= 0x80) {
      cur += static_cast<char>(std::tolower(ch));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void collect(const std::string& pattern, const text::SynonymTable& syn, std::set<std::string>& out, int depth = 0) {
  for (const auto& w : words_of(pattern)) {
    if (w[0] == '@' && depth < 4) {
      auto it = syn.find(w.substr(1));
      if (it != syn.end())
        for (const auto& alt : it->second) collect(alt, syn, out, depth + 1);
      continue;
    }
    out.insert(w);
  }
}

}  // namespace

std::set<std::string> probe_vocabulary(const patient::ScenarioScript& s) {
  std::set<std::string> out;
  auto add_all = [&](const std::vector<std::string>& patterns) {
    for (const auto& p : patterns) collect(p, s.synonyms, out);
  };
  for (const auto& f : s.facts) add_all(f.probe_patterns);
  for (const auto& r : s.red_flags) add_all(r.probe_patterns);
  for (const auto& a : s.alternatives) add_all(a.exclusion_probe_patterns);
  for (const auto& m : s.maneuvers) add_all(m.cue_patterns);
  return out;
}

bool token_banned(const std::string& word, const std::set<std::string>& banned) {
  auto w = words_of(word);
  for (const auto& token : w)
    for (const auto& b : banned) {
      if (b.back() == '*') {
        if (token.rfind(b.substr(0, b.size() - 1), 0) == 0) return true;
      } else if (token == b) {
        return true;
      }
    }
  return false;
}

std::vector<std::string> filler_words() {
  return {"what",    "about",  "your",    "day",     "weather", "garden", "dog",     "car",    "music",  "the",
          "a",       "is",     "was",     "how",     "when",    "where",  "why",     "tell",   "me",     "more",
          "anything", "else",  "weekend", "movie",   "book",    "coffee", "tea",     "work",   "job",    "kids",
          "trip",    "holiday", "really", "maybe",   "sure",    "okay",   "thanks",  "great",  "good",   "bad",
          "blue",    "green",  "red",     "window",  "door",    "table",  "chair",   "phone",  "email",  "bus",
          "train",   "city",   "river",   "mountain", "summer", "winter", "monday",  "friday", "lunch",  "dinner",
          "cook",    "recipe", "game",    "team",    "score",   "paint",  "draw",    "write",  "read",   "song",
          "dance",   "walk",   "park",    "bird",    "cat",     "fish",   "tree",    "flower", "rain",   "snow",
          "sunny",   "cloudy", "warm",    "cold",    "early",   "late",   "often",   "never",  "always", "sometimes",
          "could",   "would",  "should",  "do",      "does",    "did",    "have",    "has",    "any",    "some",
          "favorite", "color", "neighbor", "hobby",  "store",   "market", "price",   "money",  "bank",   "office",
          "computer", "screen", "camera", "light",   "sound",   "quiet",  "loud",    "happy",  "fun",    "news",
          "paper",   "letter", "number",  "name",    "street",  "house",  "roof",    "kitchen", "plant", "seed",
          "soccer",  "tennis", "chess",   "puzzle",  "guitar",  "piano",  "violin",  "poem",   "story",  "joke"};
}

std::string random_probe(Rng& rng, const std::vector<std::string>& words) {
  std::string q;
  auto n = 2 + bounded(rng, 11);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto w = words[bounded(rng, words.size())];
    if (bounded(rng, 5) == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    if (!q.empty()) q += bounded(rng, 8) == 0 ? ", " : " ";
    q += w;
  }
  q += bounded(rng, 3) ? "?" : ".";
  return q;
}

Json thorough_script_json(const patient::ScenarioScript& s) {
  Json steps = Json::array();
  int n = 0;
  auto step = [&](const std::string& text, bool frame = false, Json cites = Json::array()) {
    Json st{{"id", "s" + std::to_string(n++)}, {"say", {text}}};
    if (frame) st["frame_request"] = true;
    if (!cites.empty()) st["cites"] = cites;
    steps.push_back(st);
  };
  for (const auto& f : s.facts) {
    if (f.question.empty()) continue;
    step(f.question);
    if (f.disclosure == patient::DisclosurePolicy::OnActiveProbe) step("Can you tell me more? " + f.question);
  }
  for (const auto& r : s.red_flags) {
    if (r.question.empty()) continue;
    step(r.question);
    step("Thank you, I've noted that.", false,
         Json::array({session::to_json(Cite{r.id, EvidenceSource::PatientReported, std::nullopt})}));
  }
  for (const auto& a : s.alternatives)
    if (!a.question.empty()) step(a.question);
  step("Could you look straight into the camera for a moment so I can take a look at you?", true);
  for (const auto& m : s.maneuvers) step(m.instruction);

  Json cites = Json::array();
  for (const auto& id : s.escalation.threshold_findings) {
    bool reported = s.find_fact(id) || s.find_red_flag(id);
    cites.push_back(session::to_json(Cite{id, reported ? EvidenceSource::PatientReported : EvidenceSource::Observed, std::nullopt}));
  }
  if (!s.planner.reasoning_statement.empty()) step(s.planner.reasoning_statement, false, cites);
  if (!s.escalation.disposition_statement.empty()) step(s.escalation.disposition_statement);
  if (!s.planner.treatment_statement.empty()) step(s.planner.treatment_statement);
  step("Do you have any questions for me?");

  return Json{{"name", "thorough_" + s.id},
              {"greeting", {"Hello, I'm Dr. Rivera, and I'll be seeing you by video today. What brings you in?"}},
              {"steps", steps},
              {"answers", {{{"patterns", {"what", "is", "do", "will", "could", "am"}},
                            {"say", {"That's a good question, and we'll know more once the workup is done."}}}}},
              {"closing", {"Thank you for talking with me today. Take care."}}};
}

talker::TalkerScript thorough_script(const patient::ScenarioScript& s) {
  return talker::parse_talker_script(thorough_script_json(s));
}

Json demo_config_json(const fs::path& dir, int copies, const std::vector<std::string>& actors, const Json& backends,
                      std::uint64_t seed) {
  Json templates = Json::object();
  Json scenarios = Json::array();
  for (const auto& t : demo_templates()) {
    templates[t] = {{"scenario", data_file("scenarios/" + t + ".json").string()},
                    {"rubric", data_file("rubrics/" + t + ".json").string()}};
    for (int i = 0; i < copies; ++i) scenarios.push_back({{"id", t + "_" + std::to_string(i)}, {"template", t}});
  }
  Json arms = Json::array();
  for (const auto& [arm, spec] : backends.items()) arms.push_back(arm);
  (void)dir;
  return Json{{"name", "fixture"},   {"seed", seed},        {"arms", arms},         {"templates", templates},
              {"scenarios", scenarios}, {"actors", actors}, {"backends", backends},
              {"analysis", {{"bootstrap_n", 500}, {"reference_arm", arms.front()}}}};
}

// ---- session fuzz ----

FuzzStats fuzz_session(std::uint64_t seed, std::size_t events, std::uint32_t grace) {
  Rng rng(seed);
  auto clock = std::make_shared<session::ManualClock>(0);
  session::Session s(session::SessionId{"fuzz"}, clock);
  session::SessionConfig cfg;
  cfg.scenario_id = "fuzz";
  cfg.barge_in_grace = grace;
  cfg.max_duration_ms = std::int64_t{1} << 40;
  s.open(cfg);

  FuzzStats st;
  std::optional<std::int64_t> speaking;  // utterance the talker is streaming
  int chunk_index = 0;
  struct Cut {
    std::int64_t utterance;
    std::uint64_t barge_seq;
  };
  std::vector<Cut> cuts;

  for (std::size_t i = 0; i < events; ++i) {
    clock->advance(static_cast<std::int64_t>(bounded(rng, 700)) - 100);  // may step back; timestamps must not
    auto pick = bounded(rng, 100);
    try {
      if (pick < 40) {
        if (!speaking) {
          speaking = s.next_utterance_id();
          chunk_index = 0;
        }
        bool final = bounded(rng, 4) == 0;
        s.submit(FrameKind::TalkerUtteranceChunk,
                 {{"text", "chunk"}, {"utterance", *speaking}, {"index", chunk_index++}, {"final", final}});
        if (final) speaking.reset();
      } else if (pick < 55) {
        auto seq = s.submit(FrameKind::BargeIn, Json::object());
        ++st.barge_ins;
        if (speaking) cuts.push_back({*speaking, seq});
      } else if (pick < 75) {
        s.submit(FrameKind::PatientUtterance, {{"text", "words"}, {"end_of_turn", bounded(rng, 2) == 1}});
      } else if (pick < 82) {
        if (s.pending_truncation()) {
          std::vector<Json> in_flight(bounded(rng, 4), Json{{"text", "late"}, {"final", false}});
          s.apply_barge_in(in_flight);
        }
      } else if (pick < 88) {
        s.post_at_turn_boundary({{FrameKind::DirectiveInjected,
                                  {{"goal_id", "g"}, {"goal_kind", "elicit_history"}, {"instruction", "ask"}, {"priority", 1}}}});
      } else if (pick < 92) {
        s.submit(FrameKind::FrameCaptureRequest, Json::object());
      } else if (pick < 96) {
        s.submit(FrameKind::FrameObservation, {{"signs", Json::array()}});
      } else {
        s.submit(FrameKind::ManeuverMarker, {{"maneuver", "m"}, {"duration_s", 3}});
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ChunkRejected) throw;
      speaking.reset();  // the talker gives up on a rejected utterance
    }
  }

  auto frames = s.frames_since(0);
  st.frames = frames.size();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].seq != i) st.seq_monotone = false;
    if (i > 0 && frames[i].ts_ms < frames[i - 1].ts_ms) st.ts_monotone = false;
  }
  for (const auto& c : cuts) {
    std::size_t accepted = 0;
    for (const auto& f : frames)
      if (f.seq > c.barge_seq && session::chunk_utterance(f) == c.utterance) ++accepted;
    st.max_accepted_after_barge_in = std::max(st.max_accepted_after_barge_in, accepted);
  }
  st.replay_consistent = session::replay_turn_state(frames) == s.turn_state();
  return st;
}

}  // namespace telesim::testing
