#include "pgpt/asr.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "pgpt/text.hpp"

namespace pgpt::asr {

std::string_view errc_name(AsrErrc code) noexcept {
  switch (code) {
    case AsrErrc::EmptyTranscription: return "EmptyTranscription";
    case AsrErrc::BackendUnreachable: return "BackendUnreachable";
    case AsrErrc::BackendRejected: return "BackendRejected";
    case AsrErrc::SchemaViolation: return "SchemaViolation";
    case AsrErrc::DuplicateId: return "DuplicateId";
  }
  return "Unknown";
}

namespace {

constexpr std::array<std::string_view, 6> kManifestKeys = {"id",          "group",           "audio_path",
                                                           "reference_text", "mock_hypothesis", "mock_delay_ms"};

std::string string_field(const nlohmann::json& obj, std::string_view key, std::size_t index) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) {
    throw SchemaViolation(std::string(key), index,
                          "manifest entry " + std::to_string(index) + ": missing '" + std::string(key) + "'");
  }
  if (!it->is_string()) {
    throw SchemaViolation(std::string(key), index,
                          "manifest entry " + std::to_string(index) + ": '" + std::string(key) + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

std::vector<MockManifestEntry> parse_manifest(std::string_view json_text) {
  const auto doc = nlohmann::json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) throw SchemaViolation("", 0, "manifest is not valid JSON");
  if (!doc.is_array()) throw SchemaViolation("", 0, "manifest must be a JSON array");

  std::vector<MockManifestEntry> entries;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    if (!obj.is_object()) throw SchemaViolation("", i, "manifest entry " + std::to_string(i) + " is not an object");
    for (const auto& [key, _] : obj.items()) {
      if (std::find(kManifestKeys.begin(), kManifestKeys.end(), key) == kManifestKeys.end()) {
        throw SchemaViolation(key, i, "manifest entry " + std::to_string(i) + ": unknown key '" + key + "'");
      }
    }
    MockManifestEntry e;
    e.id = string_field(obj, "id", i);
    if (e.id.empty()) throw SchemaViolation("id", i, "manifest entry " + std::to_string(i) + ": empty id");
    e.group = string_field(obj, "group", i);
    e.audio_path = string_field(obj, "audio_path", i);
    e.reference_text = string_field(obj, "reference_text", i);
    e.mock_hypothesis = string_field(obj, "mock_hypothesis", i);
    auto delay = obj.find("mock_delay_ms");
    if (delay == obj.end()) {
      throw SchemaViolation("mock_delay_ms", i, "manifest entry " + std::to_string(i) + ": missing 'mock_delay_ms'");
    }
    if (!delay->is_number_integer() || delay->get<std::int64_t>() < 0) {
      throw SchemaViolation("mock_delay_ms", i,
                            "manifest entry " + std::to_string(i) + ": 'mock_delay_ms' must be a non-negative integer");
    }
    e.mock_delay_ms = delay->get<std::int64_t>();

    if (auto [it, inserted] = seen.emplace(e.id, i); !inserted) {
      throw AsrError(AsrErrc::DuplicateId, "manifest entries " + std::to_string(it->second) + " and " +
                                               std::to_string(i) + " share id '" + e.id + "'");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<MockManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaViolation("", 0, "cannot read manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto entries = parse_manifest(ss.str());
  for (auto& e : entries) {
    if (!e.audio_path.empty() && std::filesystem::path(e.audio_path).is_relative()) {
      e.audio_path = (path.parent_path() / e.audio_path).lexically_normal().string();
    }
  }
  return entries;
}

TranscriptResult transcribe(const AudioInput& input, Transcriber& backend) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [t0] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };
  std::string raw;
  try {
    raw = backend.recognize(input);
  } catch (const AsrError& e) {
    throw AsrError(e.code(), e.what(), e.status(), elapsed());
  }
  const double ms = elapsed();
  if (text::trim(raw).empty()) {
    throw AsrError(AsrErrc::EmptyTranscription, "backend " + backend.id() + " returned an empty transcription", 0, ms);
  }
  return TranscriptResult{std::move(raw), ms, backend.id()};
}

MockTranscriber::MockTranscriber(std::vector<MockManifestEntry> entries, std::string id)
    : entries_(std::move(entries)), id_(std::move(id)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    by_id_.emplace(entries_[i].id, i);
    if (!entries_[i].audio_path.empty()) by_path_.emplace(entries_[i].audio_path, i);
  }
}

const MockManifestEntry* MockTranscriber::find(const AudioInput& input) const {
  if (auto it = by_id_.find(input.source_id); it != by_id_.end()) return &entries_[it->second];
  if (auto it = by_path_.find(input.audio_path); it != by_path_.end()) return &entries_[it->second];
  return nullptr;
}

std::string MockTranscriber::recognize(const AudioInput& input) {
  const auto* entry = find(input);
  if (!entry) {
    throw AsrError(AsrErrc::BackendRejected, "mock backend has no entry for '" + input.source_id + "'", 404);
  }
  if (entry->mock_delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(entry->mock_delay_ms));
  return entry->mock_hypothesis;
}

}  // namespace pgpt::asr
