#include "telesim/talker/talker.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "telesim/common/error.hpp"

namespace telesim::talker {

using session::Cite;
using session::EventFrame;
using session::EvidenceSource;
using session::FrameKind;

std::vector<Cite> UtterancePlan::cites() const {
  std::vector<Cite> out;
  for (const auto& c : chunks) out.insert(out.end(), c.cites.begin(), c.cites.end());
  return out;
}

std::string UtterancePlan::text() const {
  std::string out;
  for (const auto& c : chunks) {
    if (!out.empty()) out += ' ';
    out += c.text;
  }
  return out;
}

Json to_json(const UtterancePlan& plan) {
  Json chunks = Json::array();
  for (const auto& c : plan.chunks) {
    Json cj{{"text", c.text}};
    if (!c.cites.empty()) {
      cj["cites"] = Json::array();
      for (const auto& ci : c.cites) cj["cites"].push_back(session::to_json(ci));
    }
    chunks.push_back(std::move(cj));
  }
  Json j{{"chunks", chunks}, {"frame_request", plan.frame_request}, {"close", plan.close}};
  if (!plan.directive.empty()) j["directive"] = plan.directive;
  if (!plan.step.empty()) j["step"] = plan.step;
  return j;
}

UtterancePlan plan_from_json(const Json& j) {
  try {
    UtterancePlan plan;
    for (const auto& c : j.at("chunks")) {
      PlanChunk chunk{c.at("text").get<std::string>(), {}};
      if (auto it = c.find("cites"); it != c.end())
        for (const auto& ci : *it) chunk.cites.push_back(session::cite_from_json(ci));
      plan.chunks.push_back(std::move(chunk));
    }
    plan.frame_request = j.value("frame_request", false);
    plan.close = j.value("close", false);
    plan.directive = j.value("directive", std::string());
    plan.step = j.value("step", std::string());
    return plan;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Backend, std::string("malformed utterance plan: ") + e.what());
  }
}

UtterancePlan compose_reply(const DialogueContext& ctx,
                            std::span<const planner::Directive> directives,
                            ResponderBackend& backend) {
  for (std::size_t i = 1; i < directives.size(); ++i)
    if (directives[i].priority < directives[i - 1].priority)
      throw Error(ErrorCode::InvalidArgument, "directives must be sorted by priority");
  UtterancePlan plan;
  try {
    plan = backend.reply(ctx, directives);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Transport || e.code() == ErrorCode::Backend) throw;
    throw Error(ErrorCode::Backend, backend.name() + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::Backend, backend.name() + ": " + e.what());
  }
  if (plan.chunks.empty()) throw Error(ErrorCode::Backend, backend.name() + ": empty utterance plan");
  for (const auto& c : plan.chunks)
    if (c.text.empty()) throw Error(ErrorCode::Backend, backend.name() + ": empty chunk");
  return plan;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (cur.empty() && c == ' ') continue;
    cur += c;
    bool end = c == '.' || c == '?' || c == '!';
    if (end && (i + 1 == text.size() || text[i + 1] == ' ')) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  while (!cur.empty() && cur.back() == ' ') cur.pop_back();
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// ---- scripted backend ----

namespace {

std::vector<std::string> string_list(const Json& j, const char* key) {
  std::vector<std::string> out;
  if (auto it = j.find(key); it != j.end()) {
    if (it->is_string()) return {it->get<std::string>()};
    for (const auto& s : *it) out.push_back(s.get<std::string>());
  }
  return out;
}

bool frame_has_finding(const EventFrame& f, const std::string& id) {
  for (const auto& x : session::payload_findings(f))
    if (x == id) return true;
  if (f.kind == FrameKind::FrameObservation)
    for (const auto& s : f.payload.at("signs"))
      if (s == id) return true;
  return false;
}

// Latest frame of the right class that evidences the finding, if any.
Cite resolve_cite(Cite cite, const std::vector<EventFrame>& prefix) {
  if (cite.frame || cite.source == EvidenceSource::Inferred) return cite;
  for (auto it = prefix.rbegin(); it != prefix.rend(); ++it) {
    bool kind_ok = cite.source == EvidenceSource::PatientReported
                       ? it->kind == FrameKind::PatientUtterance
                       : (it->kind == FrameKind::FrameObservation || it->kind == FrameKind::ManeuverMarker);
    if (kind_ok && frame_has_finding(*it, cite.finding)) {
      cite.frame = it->seq;
      break;
    }
  }
  return cite;
}

}  // namespace

TalkerScript parse_talker_script(const Json& j) {
  try {
    TalkerScript s;
    s.name = j.at("name").get<std::string>();
    if (auto it = j.find("synonyms"); it != j.end())
      for (const auto& [k, v] : it->items()) s.synonyms[k] = v.get<std::vector<std::string>>();
    s.greeting = string_list(j, "greeting");
    s.closing = string_list(j, "closing");
    if (s.greeting.empty() || s.closing.empty())
      throw Error(ErrorCode::Validation, "talker script needs a greeting and a closing");
    s.acknowledge = j.value("acknowledge", s.acknowledge);
    std::set<std::string> ids;
    for (const auto& st : j.value("steps", Json::array())) {
      TalkerScript::Step step;
      step.id = st.at("id").get<std::string>();
      if (!ids.insert(step.id).second)
        throw Error(ErrorCode::Validation, "duplicate talker step '" + step.id + "'");
      step.say = string_list(st, "say");
      if (step.say.empty()) throw Error(ErrorCode::Validation, "talker step '" + step.id + "' says nothing");
      step.frame_request = st.value("frame_request", false);
      for (const auto& c : st.value("cites", Json::array())) step.cites.push_back(session::cite_from_json(c));
      s.steps.push_back(std::move(step));
    }
    for (const auto& a : j.value("answers", Json::array())) {
      TalkerScript::Answer ans;
      ans.patterns = string_list(a, "patterns");
      ans.say = string_list(a, "say");
      ans.compiled = text::PatternSet(ans.patterns, s.synonyms);
      s.answers.push_back(std::move(ans));
    }
    return s;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("talker script: ") + e.what());
  }
}

TalkerScript load_talker_script(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return parse_talker_script(j);
}

ScriptedBackend::ScriptedBackend(TalkerScript script) : script_(std::move(script)) {}

UtterancePlan ScriptedBackend::reply(const DialogueContext& ctx,
                                     std::span<const planner::Directive> directives) {
  const auto& prefix = ctx.trace_prefix;
  UtterancePlan plan;

  bool spoke = false;
  std::set<std::string> done_steps;
  const EventFrame* last_patient = nullptr;
  for (const auto& f : prefix) {
    if (f.kind == FrameKind::TalkerUtteranceChunk) {
      spoke = true;
      last_patient = nullptr;
      if (auto it = f.payload.find("step"); it != f.payload.end() && it->is_string())
        done_steps.insert(it->get<std::string>());
    } else if (f.kind == FrameKind::PatientUtterance) {
      last_patient = &f;
    }
  }

  auto say = [&](const std::vector<std::string>& lines, const std::vector<Cite>& cites) {
    bool first = true;
    for (const auto& line : lines)
      for (auto& sentence : split_sentences(line)) {
        plan.chunks.push_back({std::move(sentence), first ? cites : std::vector<Cite>{}});
        first = false;
      }
  };

  if (!spoke) {
    say(script_.greeting, {});
    plan.step = "greeting";
    return plan;
  }

  if (!directives.empty()) {
    const auto& d = directives.front();
    if (!d.cites.empty()) plan.chunks.push_back({script_.acknowledge, d.cites});
    say({d.instruction}, {});
    plan.directive = d.goal_id;
    plan.frame_request = d.kind == planner::GoalKind::VisualInspection;
    return plan;
  }

  if (last_patient && session::payload_text(*last_patient).find('?') != std::string::npos) {
    auto toks = text::tokenize(session::payload_text(*last_patient));
    for (const auto& a : script_.answers)
      if (a.compiled.any(toks)) {
        say(a.say, {});
        break;
      }
  }

  for (const auto& step : script_.steps) {
    if (done_steps.count(step.id)) continue;
    std::vector<Cite> cites;
    for (const auto& c : step.cites) cites.push_back(resolve_cite(c, prefix));
    say(step.say, cites);
    plan.step = step.id;
    plan.frame_request = step.frame_request;
    return plan;
  }

  say(script_.closing, {});
  plan.close = true;
  return plan;
}

// ---- remote backend ----

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  if (config_.endpoint.rfind("http://", 0) != 0 && config_.endpoint.rfind("https://", 0) != 0)
    throw Error(ErrorCode::InvalidArgument, "remote endpoint must be an http(s) URL");
}

UtterancePlan RemoteBackend::reply(const DialogueContext& ctx,
                                   std::span<const planner::Directive> directives) {
  auto scheme_end = config_.endpoint.find("://") + 3;
  auto path_start = config_.endpoint.find('/', scheme_end);
  std::string base = config_.endpoint.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);

  Json frames = Json::array();
  for (const auto& f : ctx.trace_prefix) frames.push_back(session::to_json(f));
  Json dirs = Json::array();
  for (const auto& d : directives) dirs.push_back(planner::to_json(d));
  Json body{{"context", {{"frames", frames},
                         {"persona", {{"name", ctx.persona.name}, {"style", ctx.persona.style}}}}},
            {"directives", dirs}};

  httplib::Client client(base);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!config_.api_key_env.empty())
    if (const char* key = std::getenv(config_.api_key_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + key);

  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    Json j;
    try {
      j = Json::parse(res->body);
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::Backend, std::string("remote reply is not JSON: ") + e.what());
    }
    return plan_from_json(j);
  }
  throw Error(ErrorCode::Transport, name() + ": " + last_error);
}

// ---- fault injection ----

FailingBackend::FailingBackend(std::shared_ptr<ResponderBackend> inner, int failures)
    : inner_(std::move(inner)), failures_(failures) {}

std::string FailingBackend::name() const {
  return "failing:" + (inner_ ? inner_->name() : std::string("none"));
}

UtterancePlan FailingBackend::reply(const DialogueContext& ctx,
                                    std::span<const planner::Directive> directives) {
  ++calls_;
  if (failures_ < 0 || calls_ <= failures_ || !inner_)
    throw Error(ErrorCode::Transport, name() + ": injected transport failure");
  return inner_->reply(ctx, directives);
}

// ---- emission ----

EmitResult emit_plan(session::Session& session, const UtterancePlan& plan, const EmitHooks& hooks) {
  EmitResult out;
  auto utterance = session.next_utterance_id();
  std::vector<Json> payloads;
  for (std::size_t i = 0; i < plan.chunks.size(); ++i) {
    const auto& c = plan.chunks[i];
    Json p{{"text", c.text}, {"utterance", utterance}, {"final", i + 1 == plan.chunks.size()}};
    if (!plan.directive.empty()) p["directive"] = plan.directive;
    if (!plan.step.empty()) p["step"] = plan.step;
    if (!c.cites.empty()) {
      p["cites"] = Json::array();
      for (const auto& ci : c.cites) p["cites"].push_back(session::to_json(ci));
    }
    payloads.push_back(std::move(p));
  }

  for (std::size_t i = 0; i < payloads.size(); ++i) {
    bool barge = hooks.before_chunk && !hooks.before_chunk(plan.chunks[i], i);
    if (barge && !session.pending_truncation()) {
      session.submit(FrameKind::BargeIn, Json::object());
    }
    if (session.pending_truncation()) {
      out.interrupted = true;
      std::vector<Json> rest(payloads.begin() + static_cast<std::ptrdiff_t>(i), payloads.end());
      auto before = session.size();
      out.truncation = session.apply_barge_in(rest);
      for (const auto& f : session.frames_since(before))
        if (f.kind == FrameKind::TalkerUtteranceChunk && session::chunk_utterance(f) == utterance)
          out.seqs.push_back(f.seq);
      return out;
    }
    try {
      out.seqs.push_back(session.submit(FrameKind::TalkerUtteranceChunk, payloads[i]));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ChunkRejected) throw;
      out.interrupted = true;
      return out;
    }
  }
  if (plan.frame_request)
    out.seqs.push_back(session.submit(FrameKind::FrameCaptureRequest, Json{{"utterance", utterance}}));
  return out;
}

session::EventFrame request_frame(session::Session& session, const FrameSource& source,
                                  std::optional<std::uint64_t> request_seq) {
  if (!session.is_open()) throw Error(ErrorCode::ClosedSession, "closed session");
  Json obs = source ? source(session.elapsed_ms()) : Json{{"signs", Json::array()}};
  if (!obs.contains("signs")) obs["signs"] = Json::array();
  if (request_seq) obs["request"] = *request_seq;
  auto seq = session.submit(FrameKind::FrameObservation, std::move(obs));
  for (const auto& f : session.frames_since(seq))
    if (f.seq == seq) return f;
  throw Error(ErrorCode::InvalidArgument, "observation frame vanished");
}

}  // namespace telesim::talker
