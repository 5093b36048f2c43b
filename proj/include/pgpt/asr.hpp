#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pgpt/error.hpp"

namespace pgpt::asr {

struct TranscriptResult {
  std::string text;
  double recognition_time_ms = 0.0;
  std::string backend_id;
};

struct MockManifestEntry {
  std::string id;
  std::string group;
  std::string audio_path;
  std::string reference_text;
  std::string mock_hypothesis;
  std::int64_t mock_delay_ms = 0;
};

enum class AsrErrc {
  EmptyTranscription,
  BackendUnreachable,
  BackendRejected,
  SchemaViolation,
  DuplicateId,
};

std::string_view errc_name(AsrErrc code) noexcept;

class AsrError : public CodedError<AsrErrc> {
 public:
  AsrError(AsrErrc code, const std::string& what, int status = 0, double elapsed_ms = 0.0)
      : CodedError(code, what), status_(status), elapsed_ms_(elapsed_ms) {}

  // HTTP-style status for BackendRejected.
  int status() const noexcept { return status_; }
  // Wall-clock time spent before the failure was detected.
  double elapsed_ms() const noexcept { return elapsed_ms_; }

 private:
  int status_;
  double elapsed_ms_;
};

// Manifest errors carry the offending field and entry index.
class SchemaViolation : public AsrError {
 public:
  SchemaViolation(std::string field, std::size_t index, const std::string& what)
      : AsrError(AsrErrc::SchemaViolation, what), field_(std::move(field)), index_(index) {}
  const std::string& field() const noexcept { return field_; }
  std::size_t index() const noexcept { return index_; }

 private:
  std::string field_;
  std::size_t index_;
};

// Parses a manifest: a JSON array of objects with exactly the keys id, group,
// audio_path, reference_text, mock_hypothesis, mock_delay_ms.
std::vector<MockManifestEntry> parse_manifest(std::string_view json_text);
// Relative audio paths are resolved against the manifest's directory.
std::vector<MockManifestEntry> load_manifest(const std::filesystem::path& path);

// What a backend is asked to transcribe. Mock backends look entries up by
// source_id (then audio_path); audio backends use samples, or the file at
// audio_path when samples is empty.
struct AudioInput {
  std::string source_id;
  std::string audio_path;
  std::vector<std::int16_t> samples;
};

class Transcriber {
 public:
  virtual ~Transcriber() = default;
  virtual std::string id() const = 0;
  // Raw recognition. Throws AsrError(BackendUnreachable | BackendRejected).
  virtual std::string recognize(const AudioInput& input) = 0;
};

// Times `backend.recognize`. An empty (whitespace-only) transcript is raised
// as AsrError(EmptyTranscription) so callers take the re-prompt path.
TranscriptResult transcribe(const AudioInput& input, Transcriber& backend);

class MockTranscriber final : public Transcriber {
 public:
  explicit MockTranscriber(std::vector<MockManifestEntry> entries, std::string id = "mock");

  std::string id() const override { return id_; }
  std::string recognize(const AudioInput& input) override;

  const MockManifestEntry* find(const AudioInput& input) const;

 private:
  std::vector<MockManifestEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> by_path_;
  std::string id_;
};

struct HttpTranscriberConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:9000/v1/audio/transcriptions
  std::string model = "whisper-small";
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
};

// Posts a multipart form (file=<wav>, model=<name>) and reads the "text"
// field of the JSON response.
class HttpTranscriber final : public Transcriber {
 public:
  explicit HttpTranscriber(HttpTranscriberConfig config);

  std::string id() const override { return "http:" + config_.model; }
  std::string recognize(const AudioInput& input) override;

 private:
  HttpTranscriberConfig config_;
};

}  // namespace pgpt::asr
