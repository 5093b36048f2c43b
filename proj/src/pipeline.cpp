#include "pgpt/pipeline.hpp"

#include <algorithm>
#include <thread>

#include <spdlog/spdlog.h>

#include "pgpt/text.hpp"
#include "pgpt/wav.hpp"

namespace pgpt::pipeline {

using protocol::Frame;
using protocol::MessageKind;
using SteadyTime = std::chrono::steady_clock::time_point;

namespace {

double ms_since(SteadyTime t0, SteadyTime t1 = std::chrono::steady_clock::now()) {
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

Frame make(MessageKind kind, std::uint64_t turn, std::string body) {
  return protocol::make_frame(kind, {turn, std::string(kSenderName), std::move(body)});
}

}  // namespace

InputSource InputSource::parse(std::string_view spec) {
  if (spec == "text-only") return {InputKind::TextOnly, {}};
  const auto colon = spec.find(':');
  if (colon != std::string_view::npos && colon + 1 < spec.size()) {
    const auto kind = spec.substr(0, colon);
    const std::filesystem::path path(std::string(spec.substr(colon + 1)));
    if (kind == "wav-dir") return {InputKind::WavDir, path};
    if (kind == "manifest") return {InputKind::Manifest, path};
  }
  throw Error("invalid input '" + std::string(spec) + "': expected wav-dir:PATH, manifest:PATH or text-only");
}

std::optional<InputItem> ListSource::next() {
  if (pos_ >= items_.size()) return std::nullopt;
  return items_[pos_++];
}

std::optional<InputItem> LineSource::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    const auto t = text::trim(line);
    if (t.empty()) continue;
    return InputItem{"line" + std::to_string(line_no_), "", std::string(t)};
  }
  return std::nullopt;
}

std::vector<InputItem> manifest_items(const std::vector<asr::MockManifestEntry>& manifest) {
  std::vector<InputItem> items;
  items.reserve(manifest.size());
  for (const auto& e : manifest) items.push_back({e.id, e.audio_path, std::nullopt});
  return items;
}

std::vector<InputItem> wav_dir_items(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw Error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && text::to_lower_ascii(entry.path().extension().string()) == ".wav") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<InputItem> items;
  for (const auto& f : files) items.push_back({f.stem().string(), f.string(), std::nullopt});
  return items;
}

void PipelineConfig::validate() const {
  gate.validate();
  if (empty_retry_limit < 1) throw Error("pipeline.empty_retry_limit must be >= 1");
  if (end_flag_timeout.count() <= 0) throw Error("pipeline.end_flag_timeout_ms must be > 0");
  if (resend_interval.count() <= 0) throw Error("resend interval must be > 0");
}

std::string_view to_string(OutcomeKind kind) noexcept {
  switch (kind) {
    case OutcomeKind::Action: return "action";
    case OutcomeKind::Speech: return "speech";
    case OutcomeKind::RePrompt: return "reprompt";
  }
  return "?";
}

std::string_view to_string(TurnStatus status) noexcept {
  switch (status) {
    case TurnStatus::Ok: return "ok";
    case TurnStatus::Failed: return "failed";
    case TurnStatus::Timeout: return "robot_timeout";
    case TurnStatus::Undeliverable: return "undeliverable";
    case TurnStatus::Disconnected: return "disconnected";
    case TurnStatus::Interrupted: return "interrupted";
  }
  return "?";
}

nlohmann::ordered_json SessionSummary::to_json(bool include_latency) const {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json turns_json = nlohmann::ordered_json::array();
  std::size_t actions = 0, speech = 0, reprompts = 0, corrected = 0, injected = 0, not_ok = 0;
  for (const auto& t : turns) {
    nlohmann::ordered_json j;
    j["turn"] = t.turn;
    j["source"] = t.source;
    j["attempt"] = t.attempt;
    j["utterance"] = t.utterance;
    j["outcome"] = to_string(t.outcome);
    j["detail"] = t.detail;
    j["corrected"] = t.corrected;
    j["status"] = to_string(t.status);
    if (include_latency) {
      j["latency"] = {{"gate_ms", t.latency.gate_ms},
                      {"asr_ms", t.latency.asr_ms},
                      {"dialogue_ms", t.latency.dialogue_ms},
                      {"robot_ms", t.latency.robot_ms},
                      {"total_ms", t.latency.total_ms}};
    }
    turns_json.push_back(std::move(j));
    switch (t.outcome) {
      case OutcomeKind::Action: ++actions; break;
      case OutcomeKind::Speech: ++speech; break;
      case OutcomeKind::RePrompt: ++reprompts; break;
    }
    if (t.corrected) ++corrected;
    if (t.source == "inject") ++injected;
    if (t.status != TurnStatus::Ok) ++not_ok;
  }
  doc["totals"] = {{"turns", turns.size()}, {"actions", actions},     {"speech", speech},
                   {"reprompts", reprompts}, {"corrected", corrected}, {"injected", injected},
                   {"not_ok", not_ok}};
  doc["turns"] = std::move(turns_json);
  return doc;
}

Pipeline::Connector pipeline_connector(hub::Endpoint endpoint, hub::ClientOptions options) {
  return [endpoint = std::move(endpoint), options]() -> std::unique_ptr<hub::HubLink> {
    return hub::HubClient::connect(endpoint, std::string(kSenderName), options);
  };
}

Pipeline::Pipeline(PipelineConfig config, asr::Transcriber& transcriber, dialogue::Responder& responder,
                   ActionRegistry registry, dialogue::History history, Connector connect)
    : config_(std::move(config)),
      transcriber_(transcriber),
      responder_(responder),
      registry_(std::move(registry)),
      history_(std::move(history)),
      connect_(std::move(connect)) {
  config_.validate();
}

bool Pipeline::ensure_link() {
  while (!link_ || !link_->connected()) {
    link_.reset();
    if (stop_ && *stop_) return false;
    try {
      link_ = connect_();
      spdlog::info("pipeline: connected to hub");
    } catch (const Error& e) {
      spdlog::warn("pipeline: reconnect failed: {}", e.what());
      std::this_thread::sleep_for(config_.reconnect_delay);
    }
  }
  return true;
}

void Pipeline::handle_side_frame(const Frame& frame) {
  if (frame.kind != MessageKind::TextInjection) return;
  try {
    const auto env = protocol::envelope_of(frame);
    const auto t = text::trim(env.body);
    if (!t.empty()) injections_.emplace_back(t);
  } catch (const protocol::ProtocolError& e) {
    spdlog::warn("pipeline: ignoring malformed injection: {}", e.what());
  }
}

void Pipeline::drain_inbound() {
  if (!link_) return;
  try {
    while (auto f = link_->receive(std::chrono::milliseconds(0))) handle_side_frame(*f);
  } catch (const hub::ClientError&) {
    link_.reset();
  }
}

TurnRecord Pipeline::run_turn(const InputItem& item, int attempt) {
  const auto t0 = std::chrono::steady_clock::now();
  TurnRecord rec;
  rec.turn = next_turn_++;
  rec.source = item.source_id;
  rec.attempt = attempt;
  if (item.text) return dispatch(std::move(rec), *item.text, t0);

  auto reprompt = [&](std::string_view reason) {
    rec.outcome = OutcomeKind::RePrompt;
    rec.detail = std::string(reason);
    finish(rec, make(MessageKind::RePrompt, rec.turn, rec.detail), t0);
    return rec;
  };

  asr::AudioInput input{item.source_id, item.audio_path, {}};
  if (!item.audio_path.empty() && std::filesystem::exists(item.audio_path)) {
    const auto tg = std::chrono::steady_clock::now();
    try {
      for (auto& seg : gate::segment_wav_file(item.audio_path, config_.gate)) {
        input.samples.insert(input.samples.end(), seg.samples.begin(), seg.samples.end());
      }
    } catch (const Error& e) {
      rec.latency.gate_ms = ms_since(tg);
      spdlog::warn("pipeline: turn {}: cannot gate {}: {}", rec.turn, item.audio_path, e.what());
      return reprompt(kReasonAsrFailure);
    }
    rec.latency.gate_ms = ms_since(tg);
    if (input.samples.empty()) return reprompt(kReasonEmpty);
  }

  try {
    const auto t = asr::transcribe(input, transcriber_);
    rec.latency.asr_ms = t.recognition_time_ms;
    rec.utterance = t.text;
  } catch (const asr::AsrError& e) {
    rec.latency.asr_ms = e.elapsed_ms();
    if (e.code() == asr::AsrErrc::EmptyTranscription) return reprompt(kReasonEmpty);
    spdlog::warn("pipeline: turn {}: transcription failed: {}", rec.turn, e.what());
    return reprompt(kReasonAsrFailure);
  }

  if (gate::filter_hallucination(rec.utterance, config_.hallucination_phrases) == gate::FilterVerdict::Discard) {
    return reprompt(kReasonHallucination);
  }
  const auto utterance = rec.utterance;
  return dispatch(std::move(rec), utterance, t0);
}

TurnRecord Pipeline::run_injected(const std::string& text) {
  const auto t0 = std::chrono::steady_clock::now();
  TurnRecord rec;
  rec.turn = next_turn_++;
  rec.source = "inject";
  return dispatch(std::move(rec), text, t0);
}

TurnRecord Pipeline::dispatch(TurnRecord rec, const std::string& utterance, SteadyTime t0) {
  rec.utterance = utterance;
  const auto td = std::chrono::steady_clock::now();
  Frame frame;
  try {
    const auto outcome = dialogue::step(history_, {utterance, rec.turn}, responder_, registry_);
    rec.corrected = outcome.mode_was_corrected;
    if (const auto* cmd = std::get_if<dialogue::ActionCommand>(&outcome.result)) {
      rec.outcome = OutcomeKind::Action;
      rec.detail = cmd->action_id;
      frame = make(MessageKind::ActionCommand, rec.turn, rec.detail);
    } else {
      rec.outcome = OutcomeKind::Speech;
      rec.detail = std::get<dialogue::Reply>(outcome.result).text;
      frame = make(MessageKind::SpeechReply, rec.turn, rec.detail);
    }
  } catch (const dialogue::DialogueError& e) {
    spdlog::warn("pipeline: turn {}: dialogue failed: {}", rec.turn, e.what());
    rec.outcome = OutcomeKind::RePrompt;
    rec.detail = std::string(kReasonDialogueFailure);
    frame = make(MessageKind::RePrompt, rec.turn, rec.detail);
  }
  rec.latency.dialogue_ms = ms_since(td);
  finish(rec, frame, t0);
  return rec;
}

void Pipeline::finish(TurnRecord& rec, const Frame& frame, SteadyTime t0) {
  // A send that fails delivered nothing, so the same turn is resent on the
  // new connection.
  for (;;) {
    if (!ensure_link()) {
      rec.status = TurnStatus::Interrupted;
      break;
    }
    const auto sent = std::chrono::steady_clock::now();
    try {
      link_->send(frame);
    } catch (const hub::ClientError&) {
      link_.reset();
      continue;
    }
    await_end_flag(rec, frame, sent);
    break;
  }
  rec.latency.total_ms = ms_since(t0);
}

void Pipeline::await_end_flag(TurnRecord& rec, const Frame& frame, SteadyTime sent) {
  using std::chrono::milliseconds;
  constexpr milliseconds kPollCap{100};
  const auto deadline = sent + config_.end_flag_timeout;
  std::optional<SteadyTime> next_resend;

  for (;;) {
    if (stop_ && *stop_) {
      rec.status = TurnStatus::Interrupted;
      return;
    }
    auto now = std::chrono::steady_clock::now();
    if (next_resend && now >= *next_resend) {
      next_resend.reset();
      try {
        link_->send(frame);
      } catch (const hub::ClientError&) {
        rec.status = TurnStatus::Disconnected;
        link_.reset();
        return;
      }
    }
    if (now >= deadline) {
      spdlog::warn("pipeline: turn {}: no end flag within {} ms", rec.turn, config_.end_flag_timeout.count());
      rec.status = TurnStatus::Timeout;
      return;
    }
    auto until = deadline;
    if (next_resend) until = std::min(until, *next_resend);
    const auto wait = std::clamp(std::chrono::duration_cast<milliseconds>(until - now), milliseconds(0), kPollCap);

    std::optional<Frame> in;
    try {
      in = link_->receive(wait);
    } catch (const hub::ClientError&) {
      spdlog::warn("pipeline: turn {}: hub connection lost", rec.turn);
      rec.status = TurnStatus::Disconnected;
      link_.reset();
      return;
    }
    if (!in) continue;

    if (in->kind == MessageKind::TextInjection) {
      handle_side_frame(*in);
      continue;
    }
    if (in->kind != MessageKind::EndFlag && in->kind != MessageKind::StateBroadcast) continue;
    protocol::Envelope env;
    try {
      env = protocol::envelope_of(*in);
    } catch (const protocol::ProtocolError& e) {
      spdlog::warn("pipeline: ignoring malformed frame: {}", e.what());
      continue;
    }
    if (in->kind == MessageKind::EndFlag) {
      if (env.turn != rec.turn) {
        spdlog::warn("pipeline: ignoring end flag for turn {} while waiting on {}", env.turn, rec.turn);
        continue;
      }
      rec.status = env.body == protocol::to_string(protocol::EndStatus::Ok) ? TurnStatus::Ok : TurnStatus::Failed;
      rec.latency.robot_ms = ms_since(sent);
      return;
    }
    if (env.sender == "hub" && env.body == "undeliverable" && env.turn == rec.turn) {
      if (config_.no_wait) {
        rec.status = TurnStatus::Undeliverable;
        rec.latency.robot_ms = 0.0;
        return;
      }
      if (!next_resend) next_resend = std::chrono::steady_clock::now() + config_.resend_interval;
    }
  }
}

void Pipeline::record(SessionSummary& summary, TurnRecord rec) {
  spdlog::info("turn {} {} {} status={}", rec.turn, to_string(rec.outcome), rec.detail, to_string(rec.status));
  if (observer_) observer_(rec);
  summary.turns.push_back(std::move(rec));
}

void Pipeline::serve_injections(const std::atomic<bool>& stop, SessionSummary& summary) {
  while (!stop) {
    if (!ensure_link()) return;
    try {
      if (auto f = link_->receive(std::chrono::milliseconds(100))) handle_side_frame(*f);
    } catch (const hub::ClientError&) {
      link_.reset();
      continue;
    }
    while (!injections_.empty() && !stop) {
      auto text = std::move(injections_.front());
      injections_.pop_front();
      record(summary, run_injected(text));
    }
  }
}

SessionSummary Pipeline::run_loop(ItemSource& source, const std::atomic<bool>& stop) {
  stop_ = &stop;
  struct Reset {
    const std::atomic<bool>*& p;
    ~Reset() { p = nullptr; }
  } reset{stop_};

  // The first connection must succeed; later ones are retried.
  if (!link_) link_ = connect_();

  SessionSummary summary;
  auto take_injections = [&] {
    drain_inbound();
    while (!injections_.empty() && !stop) {
      auto text = std::move(injections_.front());
      injections_.pop_front();
      record(summary, run_injected(text));
      drain_inbound();
    }
  };

  while (!stop) {
    take_injections();
    if (stop) break;
    const auto item = source.next();
    if (!item) break;
    for (int attempt = 1; attempt <= config_.empty_retry_limit && !stop; ++attempt) {
      if (attempt > 1) take_injections();
      auto rec = run_turn(*item, attempt);
      const bool empty = rec.outcome == OutcomeKind::RePrompt &&
                         (rec.detail == kReasonEmpty || rec.detail == kReasonHallucination);
      record(summary, std::move(rec));
      if (!empty) break;
      if (attempt == config_.empty_retry_limit && attempt > 1) {
        spdlog::warn("pipeline: {} still empty after {} attempts; moving on", item->source_id, attempt);
      }
    }
  }
  if (config_.serve_injections) {
    serve_injections(stop, summary);
  } else if (!stop) {
    take_injections();
  }
  return summary;
}

}  // namespace pgpt::pipeline
