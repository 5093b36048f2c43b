#include "pgpt/audio_gate.hpp"

#include <algorithm>
#include <cmath>

#include "pgpt/text.hpp"
#include "pgpt/wav.hpp"

namespace pgpt::gate {

void GateConfig::validate() const {
  if (min_speech_ms <= 0 || hangover_ms <= 0 || max_utterance_s <= 0) {
    throw GateError(GateErrc::InvalidConfig, "gate durations must be positive");
  }
  // Frame levels lie in [-100, 0] dBFS; outside (-100, 0] every frame or no frame is voiced.
  if (!(threshold_dbfs > -100.0 && threshold_dbfs <= 0.0)) {
    throw GateError(GateErrc::InvalidConfig, "gate.threshold_dbfs must be in (-100, 0]");
  }
  if (static_cast<double>(min_speech_ms) >= max_utterance_s * 1000.0) {
    throw GateError(GateErrc::InvalidConfig, "gate.min_speech_ms must be below gate.max_utterance_s");
  }
}

double rms_dbfs(std::span<const std::int16_t> frame) {
  if (frame.empty()) throw GateError(GateErrc::EmptyFrame, "rms of an empty frame");
  double sum = 0.0;
  for (auto s : frame) sum += static_cast<double>(s) * static_cast<double>(s);
  const double rms = std::sqrt(sum / static_cast<double>(frame.size()));
  if (rms <= 0.0) return kSilenceFloorDbfs;
  return std::max(kSilenceFloorDbfs, 20.0 * std::log10(rms / 32768.0));
}

std::string_view to_string(GatePhase phase) noexcept {
  switch (phase) {
    case GatePhase::Quiet: return "Quiet";
    case GatePhase::Candidate: return "Candidate";
    case GatePhase::InSpeech: return "InSpeech";
  }
  return "?";
}

Gate::Gate(GateConfig config) : Gate(config, std::make_shared<EnergyVoiceDetector>(config.threshold_dbfs)) {}

Gate::Gate(GateConfig config, std::shared_ptr<const VoiceDetector> detector)
    : config_(config), detector_(std::move(detector)) {
  config_.validate();
}

std::vector<GateEvent> Gate::process_frame(std::span<const std::int16_t> frame) {
  if (frame.empty()) throw GateError(GateErrc::EmptyFrame, "empty audio frame");
  if (frame.size() > kFrameSamples) {
    throw GateError(GateErrc::MalformedFrame, "frame of " + std::to_string(frame.size()) + " samples");
  }
  if (saw_short_frame_) throw GateError(GateErrc::MalformedFrame, "frame after the final short frame");
  if (frame.size() < kFrameSamples) saw_short_frame_ = true;

  std::vector<GateEvent> events;
  const bool voiced = detector_->is_voiced(frame);
  const auto len = static_cast<std::int64_t>(frame.size());
  const std::int64_t frame_start = position_;
  const std::int64_t frame_end = position_ + len;
  position_ = frame_end;

  const std::int64_t min_speech = config_.min_speech_ms * kSamplesPerMs;
  const std::int64_t hangover = config_.hangover_ms * kSamplesPerMs;
  const std::int64_t max_len = std::llround(config_.max_utterance_s * 1000.0) * kSamplesPerMs;

  switch (phase_) {
    case GatePhase::Quiet:
      if (!voiced) break;
      phase_ = GatePhase::Candidate;
      start_ = frame_start;
      voiced_run_ = 0;
      buffer_.clear();
      [[fallthrough]];
    case GatePhase::Candidate:
      if (!voiced) {
        phase_ = GatePhase::Quiet;
        buffer_.clear();
        break;
      }
      voiced_run_ += len;
      buffer_.insert(buffer_.end(), frame.begin(), frame.end());
      if (voiced_run_ >= min_speech) {
        phase_ = GatePhase::InSpeech;
        last_voiced_end_ = frame_end;
        silence_run_ = 0;
        events.emplace_back(SpeechStart{start_ / kSamplesPerMs});
      }
      break;
    case GatePhase::InSpeech:
      buffer_.insert(buffer_.end(), frame.begin(), frame.end());
      if (voiced) {
        last_voiced_end_ = frame_end;
        silence_run_ = 0;
      } else {
        silence_run_ += len;
      }
      if (silence_run_ >= hangover) {
        close_segment(last_voiced_end_, events);
      } else if (frame_end - start_ >= max_len) {
        close_segment(std::min(last_voiced_end_, start_ + max_len), events);
      }
      break;
  }
  return events;
}

void Gate::close_segment(std::int64_t end_sample, std::vector<GateEvent>& events) {
  AudioSegment seg;
  seg.start_ms = start_ / kSamplesPerMs;
  seg.end_ms = end_sample / kSamplesPerMs;
  const auto n = static_cast<std::size_t>(end_sample - start_);
  seg.samples.assign(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(std::min(n, buffer_.size())));
  events.emplace_back(SpeechEnd{std::move(seg)});
  phase_ = GatePhase::Quiet;
  buffer_.clear();
  voiced_run_ = 0;
  silence_run_ = 0;
}

std::vector<GateEvent> Gate::push(std::span<const std::int16_t> samples) {
  std::vector<GateEvent> events;
  std::size_t offset = 0;
  if (!pending_.empty()) {
    const std::size_t take = std::min(kFrameSamples - pending_.size(), samples.size());
    pending_.insert(pending_.end(), samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(take));
    offset = take;
    if (pending_.size() < kFrameSamples) return events;
    auto ev = process_frame(pending_);
    events.insert(events.end(), std::make_move_iterator(ev.begin()), std::make_move_iterator(ev.end()));
    pending_.clear();
  }
  while (samples.size() - offset >= kFrameSamples) {
    auto ev = process_frame(samples.subspan(offset, kFrameSamples));
    events.insert(events.end(), std::make_move_iterator(ev.begin()), std::make_move_iterator(ev.end()));
    offset += kFrameSamples;
  }
  pending_.assign(samples.begin() + static_cast<std::ptrdiff_t>(offset), samples.end());
  return events;
}

std::vector<GateEvent> Gate::finish() {
  std::vector<GateEvent> events;
  if (!pending_.empty()) {
    events = process_frame(pending_);
    pending_.clear();
  }
  if (phase_ == GatePhase::InSpeech) {
    close_segment(last_voiced_end_, events);
  } else if (phase_ == GatePhase::Candidate) {
    phase_ = GatePhase::Quiet;
    buffer_.clear();
  }
  return events;
}

std::vector<AudioSegment> segment_samples(std::span<const std::int16_t> samples, const GateConfig& config) {
  Gate gate(config);
  std::vector<AudioSegment> out;
  auto collect = [&out](std::vector<GateEvent>&& events) {
    for (auto& ev : events) {
      if (auto* end = std::get_if<SpeechEnd>(&ev)) out.push_back(std::move(end->segment));
    }
  };
  for (std::size_t off = 0; off < samples.size(); off += kFrameSamples) {
    collect(gate.process_frame(samples.subspan(off, std::min(kFrameSamples, samples.size() - off))));
  }
  collect(gate.finish());
  return out;
}

std::vector<AudioSegment> segment_wav_file(const std::filesystem::path& path, const GateConfig& config) {
  const auto samples = wav::read_pcm16_mono(path);
  return segment_samples(samples, config);
}

std::vector<std::string> default_hallucination_phrases() {
  return {"thank you.", "thank you for your watching.", "thanks for watching."};
}

FilterVerdict filter_hallucination(std::string_view transcript, const std::vector<std::string>& phrases) {
  const auto normalized = text::to_lower_ascii(text::trim(transcript));
  for (const auto& phrase : phrases) {
    if (normalized == text::to_lower_ascii(text::trim(phrase))) return FilterVerdict::Discard;
  }
  return FilterVerdict::Keep;
}

}  // namespace pgpt::gate
