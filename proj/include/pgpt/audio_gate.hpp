#pragma once

// Voice-activity gate: turns a 16 kHz mono PCM stream into speech segments.
//
// The gate is a three-state machine (Quiet, Candidate, InSpeech) driven by a
// per-frame voiced/unvoiced decision from a VoiceDetector. A segment opens
// once min_speech_ms of consecutive voiced audio has accumulated (its start
// is back-dated to the first voiced frame) and closes after hangover_ms of
// consecutive unvoiced audio, at max_utterance_s, or at end of stream. The
// closing boundary is the end of the last voiced frame.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pgpt/error.hpp"

namespace pgpt::gate {

inline constexpr std::size_t kFrameSamples = 320;  // 20 ms at 16 kHz
inline constexpr std::int64_t kSamplesPerMs = 16;
inline constexpr double kSilenceFloorDbfs = -100.0;

enum class GateErrc { EmptyFrame, MalformedFrame, InvalidConfig };

class GateError : public CodedError<GateErrc> {
 public:
  using CodedError::CodedError;
};

struct GateConfig {
  double threshold_dbfs = -35.0;
  std::int64_t min_speech_ms = 300;
  std::int64_t hangover_ms = 700;
  double max_utterance_s = 30.0;

  // Throws GateError(InvalidConfig).
  void validate() const;
};

// 20*log10(rms/32768), clamped below at -100 dBFS.
double rms_dbfs(std::span<const std::int16_t> frame);

class VoiceDetector {
 public:
  virtual ~VoiceDetector() = default;
  virtual bool is_voiced(std::span<const std::int16_t> frame) const = 0;
};

class EnergyVoiceDetector final : public VoiceDetector {
 public:
  explicit EnergyVoiceDetector(double threshold_dbfs) : threshold_dbfs_(threshold_dbfs) {}
  bool is_voiced(std::span<const std::int16_t> frame) const override { return rms_dbfs(frame) >= threshold_dbfs_; }

 private:
  double threshold_dbfs_;
};

struct AudioSegment {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::vector<std::int16_t> samples;

  std::int64_t duration_ms() const noexcept { return end_ms - start_ms; }
  bool operator==(const AudioSegment&) const = default;
};

struct SpeechStart {
  std::int64_t start_ms = 0;
};
struct SpeechEnd {
  AudioSegment segment;
};
using GateEvent = std::variant<SpeechStart, SpeechEnd>;

enum class GatePhase { Quiet, Candidate, InSpeech };

std::string_view to_string(GatePhase phase) noexcept;

// Single-owner streaming gate. One instance per audio stream.
class Gate {
 public:
  // Uses an EnergyVoiceDetector at config.threshold_dbfs.
  explicit Gate(GateConfig config);
  Gate(GateConfig config, std::shared_ptr<const VoiceDetector> detector);

  // Feeds exactly one frame. Frames must be kFrameSamples long except the
  // last frame of a stream, which may be shorter.
  std::vector<GateEvent> process_frame(std::span<const std::int16_t> frame);

  // Feeds an arbitrary chunk; samples are re-framed internally so the result
  // does not depend on chunk boundaries.
  std::vector<GateEvent> push(std::span<const std::int16_t> samples);

  // Flushes the partial frame (if any) and closes an open segment.
  std::vector<GateEvent> finish();

  GatePhase phase() const noexcept { return phase_; }
  std::int64_t position_ms() const noexcept { return position_ / kSamplesPerMs; }

 private:
  void close_segment(std::int64_t end_sample, std::vector<GateEvent>& events);

  GateConfig config_;
  std::shared_ptr<const VoiceDetector> detector_;
  GatePhase phase_ = GatePhase::Quiet;
  std::int64_t position_ = 0;  // samples consumed
  std::int64_t start_ = 0;     // first sample of candidate/segment
  std::int64_t voiced_run_ = 0;
  std::int64_t silence_run_ = 0;
  std::int64_t last_voiced_end_ = 0;
  std::vector<std::int16_t> buffer_;   // samples since start_
  std::vector<std::int16_t> pending_;  // partial frame from push()
  bool saw_short_frame_ = false;
};

// Runs a fresh gate over a whole sample buffer.
std::vector<AudioSegment> segment_samples(std::span<const std::int16_t> samples, const GateConfig& config);

// Offline counterpart of the streaming gate over a WAV file.
std::vector<AudioSegment> segment_wav_file(const std::filesystem::path& path, const GateConfig& config);

enum class FilterVerdict { Keep, Discard };

std::vector<std::string> default_hallucination_phrases();

// Discards a transcript iff, trimmed and lowercased, it equals one of the
// phrases (compared the same way).
FilterVerdict filter_hallucination(std::string_view transcript, const std::vector<std::string>& phrases);

}  // namespace pgpt::gate
