#pragma once

// Turn orchestration: gate -> transcribe -> filter -> dialogue step, then one
// A, S or P frame to the hub and a wait for the controller's E frame. Turn
// N+1 never starts before turn N's end flag (or its timeout).

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgpt/action_registry.hpp"
#include "pgpt/asr.hpp"
#include "pgpt/audio_gate.hpp"
#include "pgpt/dialogue.hpp"
#include "pgpt/hub_client.hpp"

namespace pgpt::pipeline {

inline constexpr std::string_view kSenderName = "pipeline";

// P frame reasons.
inline constexpr std::string_view kReasonEmpty = "empty_transcription";
inline constexpr std::string_view kReasonHallucination = "hallucination";
inline constexpr std::string_view kReasonAsrFailure = "asr_failure";
inline constexpr std::string_view kReasonDialogueFailure = "dialogue_failure";

enum class InputKind { WavDir, Manifest, TextOnly };

struct InputSource {
  InputKind kind = InputKind::TextOnly;
  std::filesystem::path path;

  // "wav-dir:PATH", "manifest:PATH" or "text-only". Throws pgpt::Error.
  static InputSource parse(std::string_view spec);
};

struct InputItem {
  std::string source_id;
  std::string audio_path;           // may be empty or point to a missing file
  std::optional<std::string> text;  // set for text-only lines; skips gate and asr
};

class ItemSource {
 public:
  virtual ~ItemSource() = default;
  virtual std::optional<InputItem> next() = 0;
};

class ListSource final : public ItemSource {
 public:
  explicit ListSource(std::vector<InputItem> items) : items_(std::move(items)) {}
  std::optional<InputItem> next() override;

 private:
  std::vector<InputItem> items_;
  std::size_t pos_ = 0;
};

// One utterance per non-blank line.
class LineSource final : public ItemSource {
 public:
  explicit LineSource(std::istream& in) : in_(in) {}
  std::optional<InputItem> next() override;

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

// Manifest entries in order, keyed by id.
std::vector<InputItem> manifest_items(const std::vector<asr::MockManifestEntry>& manifest);
// *.wav files in name order, keyed by file stem.
std::vector<InputItem> wav_dir_items(const std::filesystem::path& dir);

struct PipelineConfig {
  gate::GateConfig gate;
  std::vector<std::string> hallucination_phrases = gate::default_hallucination_phrases();
  // Attempts per input item while it keeps producing empty or discarded
  // transcripts; 1 means no retry.
  int empty_retry_limit = 3;
  std::chrono::milliseconds end_flag_timeout{60000};
  // Resend period while the hub reports the controller as absent.
  std::chrono::milliseconds resend_interval{500};
  // Treat an undeliverable notice as turn completion (robot_ms = 0).
  bool no_wait = false;
  // After the input source is exhausted, keep serving T injections until
  // stopped.
  bool serve_injections = false;
  std::chrono::milliseconds reconnect_delay{500};

  // Throws pgpt::Error on invalid values.
  void validate() const;
};

enum class OutcomeKind { Action, Speech, RePrompt };
std::string_view to_string(OutcomeKind kind) noexcept;

enum class TurnStatus { Ok, Failed, Timeout, Undeliverable, Disconnected, Interrupted };
std::string_view to_string(TurnStatus status) noexcept;

struct Latencies {
  double gate_ms = 0.0;
  double asr_ms = 0.0;
  double dialogue_ms = 0.0;
  double robot_ms = 0.0;
  double total_ms = 0.0;
};

struct TurnRecord {
  std::uint64_t turn = 0;
  std::string source;     // input item id, or "inject"
  std::string utterance;  // transcript or injected text
  OutcomeKind outcome = OutcomeKind::RePrompt;
  std::string detail;  // action id, reply text, or re-prompt reason
  bool corrected = false;
  TurnStatus status = TurnStatus::Ok;
  int attempt = 1;
  Latencies latency;
};

struct SessionSummary {
  std::vector<TurnRecord> turns;

  // Latencies are wall-clock and vary between runs; everything else is
  // deterministic under mock backends.
  nlohmann::ordered_json to_json(bool include_latency = true) const;
};

class Pipeline {
 public:
  using Connector = std::function<std::unique_ptr<hub::HubLink>()>;

  Pipeline(PipelineConfig config, asr::Transcriber& transcriber, dialogue::Responder& responder,
           ActionRegistry registry, dialogue::History history, Connector connect);

  // One turn for one input item (single attempt).
  TurnRecord run_turn(const InputItem& item, int attempt = 1);
  // One turn from injected text: no gate, no asr.
  TurnRecord run_injected(const std::string& text);

  // Runs every item (with retries), giving queued T injections priority at
  // each turn boundary. Returns when the source is exhausted (and, with
  // serve_injections, when `stop` is set) or when `stop` is set.
  SessionSummary run_loop(ItemSource& source, const std::atomic<bool>& stop);

  // Called after every completed turn.
  void set_turn_observer(std::function<void(const TurnRecord&)> observer) { observer_ = std::move(observer); }

  const dialogue::History& history() const noexcept { return history_; }
  std::uint64_t next_turn_id() const noexcept { return next_turn_; }
  std::size_t pending_injections() const noexcept { return injections_.size(); }

 private:
  TurnRecord dispatch(TurnRecord rec, const std::string& utterance, std::chrono::steady_clock::time_point t0);
  void finish(TurnRecord& rec, const protocol::Frame& frame, std::chrono::steady_clock::time_point t0);
  void await_end_flag(TurnRecord& rec, const protocol::Frame& frame, std::chrono::steady_clock::time_point sent);
  bool ensure_link();
  void handle_side_frame(const protocol::Frame& frame);
  void drain_inbound();
  void serve_injections(const std::atomic<bool>& stop, SessionSummary& summary);
  void record(SessionSummary& summary, TurnRecord rec);

  PipelineConfig config_;
  asr::Transcriber& transcriber_;
  dialogue::Responder& responder_;
  ActionRegistry registry_;
  dialogue::History history_;
  Connector connect_;
  std::unique_ptr<hub::HubLink> link_;
  std::deque<std::string> injections_;
  std::uint64_t next_turn_ = 1;
  const std::atomic<bool>* stop_ = nullptr;
  std::function<void(const TurnRecord&)> observer_;
};

// Default connector: a HubClient registered as "pipeline".
Pipeline::Connector pipeline_connector(hub::Endpoint endpoint, hub::ClientOptions options = {});

}  // namespace pgpt::pipeline
