#pragma once

// Shared configuration for all subcommands.
//
// A config file is a JSON object, nested ({"gate": {"threshold_dbfs": -35}})
// or flat with dotted keys ({"gate.threshold_dbfs": -35}), or a mix. Every
// key must be known; a misspelt key is a startup error. Values are merged
// with precedence flags > environment > file > defaults. Relative paths in
// a config file are resolved against the file's directory.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgpt/audio_gate.hpp"
#include "pgpt/error.hpp"

namespace pgpt::config {

enum class ConfigErrc { UnknownKey, TypeMismatch, ParseFailure, IoFailure, InvalidValue };

std::string_view errc_name(ConfigErrc code) noexcept;

class ConfigError : public CodedError<ConfigErrc> {
 public:
  ConfigError(ConfigErrc code, std::string key, const std::string& what)
      : CodedError(code, what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

struct Settings {
  gate::GateConfig gate;
  std::vector<std::string> hallucination_phrases = gate::default_hallucination_phrases();

  struct Asr {
    std::string backend = "mock";  // mock | http
    std::string endpoint;
    std::string model = "whisper-small";
    std::string mock_manifest;
    std::string api_key;
    std::int64_t timeout_ms = 30000;
  } asr;

  struct Llm {
    std::string backend = "mock";  // mock | http
    std::string endpoint;
    std::string model = "gpt-3.5-turbo";
    std::string system_prompt;  // empty: built-in prompt
    std::string scenario;       // mock responder script
    std::string api_key;
    std::int64_t history_exchanges = 20;
    std::int64_t timeout_ms = 30000;
  } llm;

  struct Pipeline {
    std::int64_t empty_retry_limit = 3;
    std::int64_t end_flag_timeout_ms = 60000;
    std::int64_t resend_interval_ms = 500;
    std::int64_t heartbeat_ms = 5000;
    std::string summary_path;
  } pipeline;

  struct Hub {
    std::int64_t heartbeat_interval_ms = 5000;
    std::int64_t missed_heartbeats = 2;
    std::int64_t write_timeout_ms = 5000;
    std::int64_t observer_outbox_limit = 1024;
    std::string log_path;
  } hub;

  std::string actions_registry;  // empty: built-in seed registry

  struct Robot {
    std::string gestures;  // empty: built-in rules
    bool virtual_clock = false;
    std::string event_log;
  } robot;
};

// Dotted key -> JSON value. Arrays and scalars are leaves.
using FlatConfig = std::map<std::string, nlohmann::json>;

// Throws ConfigError(ParseFailure) when the text is not a JSON object.
FlatConfig flatten(std::string_view json_text);

const std::vector<std::string>& known_keys();

// Throws ConfigError(UnknownKey | TypeMismatch).
void merge(Settings& settings, const FlatConfig& values);

// Reads env vars through `getenv` (nullopt when unset).
using EnvLookup = std::function<std::optional<std::string>(std::string_view)>;
EnvLookup process_env();

// Resolves the config file (explicit path, else PGPT_CONFIG), applies it,
// then env vars (PGPT_ASR_API_KEY, PGPT_LLM_API_KEY), then `overrides`.
Settings load(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
              const FlatConfig& overrides = {});

}  // namespace pgpt::config
