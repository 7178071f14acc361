#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "telesim/common/json.hpp"
#include "telesim/common/text_match.hpp"
#include "telesim/planner/planner.hpp"
#include "telesim/session/frame.hpp"
#include "telesim/session/session.hpp"

namespace telesim::talker {

struct Persona {
  std::string name = "Dr. Rivera";
  std::string style = "warm, plain-spoken, concise";
};

/// Everything the talker may see: the visible log prefix and its persona.
/// Deliberately carries no scenario content.
struct DialogueContext {
  std::vector<session::EventFrame> trace_prefix;
  Persona persona;
};

struct PlanChunk {
  std::string text;
  std::vector<session::Cite> cites;
  bool operator==(const PlanChunk&) const = default;
};

struct UtterancePlan {
  std::vector<PlanChunk> chunks;
  bool frame_request = false;
  bool close = false;          // end the encounter after this utterance
  std::string directive;       // goal id realized, if any
  std::string step;            // scripted step id, if any

  std::vector<session::Cite> cites() const;
  std::string text() const;
  bool operator==(const UtterancePlan&) const = default;
};

Json to_json(const UtterancePlan& plan);
UtterancePlan plan_from_json(const Json& j);

class ResponderBackend {
 public:
  virtual ~ResponderBackend() = default;
  virtual std::string name() const = 0;
  /// May throw; compose_reply turns failures into typed errors.
  virtual UtterancePlan reply(const DialogueContext& ctx,
                              std::span<const planner::Directive> directives) = 0;
};

/// Directives must be in planner order. Backend failures surface as
/// Error(Backend) or Error(Transport); an empty plan is a Backend error.
UtterancePlan compose_reply(const DialogueContext& ctx,
                            std::span<const planner::Directive> directives,
                            ResponderBackend& backend);

/// Splits text into sentences, one chunk each.
std::vector<std::string> split_sentences(const std::string& text);

/// A finite-state conversation script with a pattern table for answering
/// patient questions. The cursor is recovered from the trace (the `step`
/// field of earlier chunks), so the backend itself is stateless.
struct TalkerScript {
  struct Step {
    std::string id;
    std::vector<std::string> say;
    std::vector<session::Cite> cites;  // frames resolved against the trace
    bool frame_request = false;
  };
  struct Answer {
    std::vector<std::string> patterns;
    std::vector<std::string> say;
    text::PatternSet compiled;
  };

  std::string name;
  std::vector<std::string> greeting;
  std::vector<Step> steps;
  std::vector<Answer> answers;
  std::vector<std::string> closing;
  std::string acknowledge = "Thank you, I've noted that.";
  text::SynonymTable synonyms;
};

TalkerScript parse_talker_script(const Json& j);
TalkerScript load_talker_script(const std::filesystem::path& path);

class ScriptedBackend : public ResponderBackend {
 public:
  explicit ScriptedBackend(TalkerScript script);
  std::string name() const override { return "scripted:" + script_.name; }
  UtterancePlan reply(const DialogueContext& ctx,
                      std::span<const planner::Directive> directives) override;

 private:
  TalkerScript script_;
};

/// HTTP adapter for an external responder. POSTs {"context", "directives"}
/// and expects an UtterancePlan JSON body.
struct RemoteConfig {
  std::string endpoint;  // http://host:port/path
  std::chrono::milliseconds timeout{10000};
  int retries = 0;
  std::string api_key_env;  // name of an environment variable holding a bearer token
};

class RemoteBackend : public ResponderBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  std::string name() const override { return "remote:" + config_.endpoint; }
  UtterancePlan reply(const DialogueContext& ctx,
                      std::span<const planner::Directive> directives) override;

 private:
  RemoteConfig config_;
};

/// Fault injection: fails the first `failures` calls with a transport error
/// (all calls when failures < 0), then delegates.
class FailingBackend : public ResponderBackend {
 public:
  FailingBackend(std::shared_ptr<ResponderBackend> inner, int failures);
  std::string name() const override;
  UtterancePlan reply(const DialogueContext& ctx,
                      std::span<const planner::Directive> directives) override;

 private:
  std::shared_ptr<ResponderBackend> inner_;
  int failures_;
  int calls_ = 0;
};

struct EmitHooks {
  // Runs before each chunk is submitted (the batch driver advances its clock
  // here). Returning false simulates a barge-in arriving before that chunk.
  std::function<bool(const PlanChunk&, std::size_t index)> before_chunk;
};

struct EmitResult {
  std::vector<std::uint64_t> seqs;
  bool interrupted = false;
  session::TruncationRecord truncation;
};

/// One TalkerUtteranceChunk per chunk, then a FrameCaptureRequest when asked
/// for. If a barge-in is pending, the remaining chunks go through
/// apply_barge_in.
EmitResult emit_plan(session::Session& session, const UtterancePlan& plan, const EmitHooks& hooks = {});

/// Appends the currently visible signs as a FrameObservation and returns it.
using FrameSource = std::function<Json(std::int64_t t_ms)>;
session::EventFrame request_frame(session::Session& session, const FrameSource& source,
                                  std::optional<std::uint64_t> request_seq = std::nullopt);

}  // namespace telesim::talker
