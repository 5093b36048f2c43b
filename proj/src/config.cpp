#include "pgpt/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pgpt::config {

using nlohmann::json;

std::string_view errc_name(ConfigErrc code) noexcept {
  switch (code) {
    case ConfigErrc::UnknownKey: return "UnknownKey";
    case ConfigErrc::TypeMismatch: return "TypeMismatch";
    case ConfigErrc::ParseFailure: return "ParseFailure";
    case ConfigErrc::IoFailure: return "IoFailure";
    case ConfigErrc::InvalidValue: return "InvalidValue";
  }
  return "Unknown";
}

namespace {

void flatten_into(const json& node, const std::string& prefix, FlatConfig& out) {
  for (const auto& [k, v] : node.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      flatten_into(v, key, out);
      continue;
    }
    if (!out.emplace(key, v).second) {
      throw ConfigError(ConfigErrc::ParseFailure, key, "config key '" + key + "' is given twice");
    }
  }
}

[[noreturn]] void mismatch(const std::string& key, std::string_view expected) {
  throw ConfigError(ConfigErrc::TypeMismatch, key, "config key '" + key + "' must be " + std::string(expected));
}

using Setter = std::function<void(Settings&, const std::string&, const json&)>;

template <typename Get>
Setter string_key(Get get) {
  return [get](Settings& s, const std::string& key, const json& v) {
    if (!v.is_string()) mismatch(key, "a string");
    get(s) = v.get<std::string>();
  };
}

template <typename Get>
Setter int_key(Get get) {
  return [get](Settings& s, const std::string& key, const json& v) {
    if (!v.is_number_integer()) mismatch(key, "an integer");
    get(s) = v.get<std::int64_t>();
  };
}

template <typename Get>
Setter number_key(Get get) {
  return [get](Settings& s, const std::string& key, const json& v) {
    if (!v.is_number()) mismatch(key, "a number");
    get(s) = v.get<double>();
  };
}

template <typename Get>
Setter bool_key(Get get) {
  return [get](Settings& s, const std::string& key, const json& v) {
    if (!v.is_boolean()) mismatch(key, "true or false");
    get(s) = v.get<bool>();
  };
}

template <typename Get>
Setter string_list_key(Get get) {
  return [get](Settings& s, const std::string& key, const json& v) {
    if (!v.is_array()) mismatch(key, "an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) mismatch(key, "an array of strings");
      out.push_back(e.get<std::string>());
    }
    get(s) = std::move(out);
  };
}

#define PGPT_FIELD(expr) [](Settings& s) -> auto& { return s.expr; }

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"gate.threshold_dbfs", number_key(PGPT_FIELD(gate.threshold_dbfs))},
      {"gate.min_speech_ms", int_key(PGPT_FIELD(gate.min_speech_ms))},
      {"gate.hangover_ms", int_key(PGPT_FIELD(gate.hangover_ms))},
      {"gate.max_utterance_s", number_key(PGPT_FIELD(gate.max_utterance_s))},
      {"gate.hallucination_phrases", string_list_key(PGPT_FIELD(hallucination_phrases))},
      {"asr.backend", string_key(PGPT_FIELD(asr.backend))},
      {"asr.endpoint", string_key(PGPT_FIELD(asr.endpoint))},
      {"asr.model", string_key(PGPT_FIELD(asr.model))},
      {"asr.mock_manifest", string_key(PGPT_FIELD(asr.mock_manifest))},
      {"asr.api_key", string_key(PGPT_FIELD(asr.api_key))},
      {"asr.timeout_ms", int_key(PGPT_FIELD(asr.timeout_ms))},
      {"llm.backend", string_key(PGPT_FIELD(llm.backend))},
      {"llm.endpoint", string_key(PGPT_FIELD(llm.endpoint))},
      {"llm.model", string_key(PGPT_FIELD(llm.model))},
      {"llm.system_prompt", string_key(PGPT_FIELD(llm.system_prompt))},
      {"llm.scenario", string_key(PGPT_FIELD(llm.scenario))},
      {"llm.api_key", string_key(PGPT_FIELD(llm.api_key))},
      {"llm.history_exchanges", int_key(PGPT_FIELD(llm.history_exchanges))},
      {"llm.timeout_ms", int_key(PGPT_FIELD(llm.timeout_ms))},
      {"pipeline.empty_retry_limit", int_key(PGPT_FIELD(pipeline.empty_retry_limit))},
      {"pipeline.end_flag_timeout_ms", int_key(PGPT_FIELD(pipeline.end_flag_timeout_ms))},
      {"pipeline.resend_interval_ms", int_key(PGPT_FIELD(pipeline.resend_interval_ms))},
      {"pipeline.heartbeat_ms", int_key(PGPT_FIELD(pipeline.heartbeat_ms))},
      {"pipeline.summary_path", string_key(PGPT_FIELD(pipeline.summary_path))},
      {"hub.heartbeat_interval_ms", int_key(PGPT_FIELD(hub.heartbeat_interval_ms))},
      {"hub.missed_heartbeats", int_key(PGPT_FIELD(hub.missed_heartbeats))},
      {"hub.write_timeout_ms", int_key(PGPT_FIELD(hub.write_timeout_ms))},
      {"hub.observer_outbox_limit", int_key(PGPT_FIELD(hub.observer_outbox_limit))},
      {"hub.log_path", string_key(PGPT_FIELD(hub.log_path))},
      {"actions.registry", string_key(PGPT_FIELD(actions_registry))},
      {"robot.gestures", string_key(PGPT_FIELD(robot.gestures))},
      {"robot.virtual_clock", bool_key(PGPT_FIELD(robot.virtual_clock))},
      {"robot.event_log", string_key(PGPT_FIELD(robot.event_log))},
  };
  return table;
}

#undef PGPT_FIELD

void check_positive(std::int64_t v, const char* key) {
  if (v <= 0) throw ConfigError(ConfigErrc::InvalidValue, key, std::string(key) + " must be > 0");
}

void check_backend(const std::string& v, const char* key) {
  if (v != "mock" && v != "http") {
    throw ConfigError(ConfigErrc::InvalidValue, key, std::string(key) + " must be mock or http, got '" + v + "'");
  }
}

}  // namespace

FlatConfig flatten(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(ConfigErrc::ParseFailure, "", std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError(ConfigErrc::ParseFailure, "", "config must be a JSON object");
  FlatConfig out;
  flatten_into(doc, "", out);
  return out;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [k, _] : setters()) out.push_back(k);
    return out;
  }();
  return keys;
}

void merge(Settings& settings, const FlatConfig& values) {
  const auto& table = setters();
  for (const auto& [key, value] : values) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(ConfigErrc::UnknownKey, key, "unknown config key '" + key + "'");
    it->second(settings, key, value);
  }
}

EnvLookup process_env() {
  return [](std::string_view name) -> std::optional<std::string> {
    const char* v = std::getenv(std::string(name).c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

Settings load(const std::optional<std::filesystem::path>& file, const EnvLookup& env, const FlatConfig& overrides) {
  Settings s;
  std::optional<std::filesystem::path> path = file;
  if (!path) {
    if (auto p = env("PGPT_CONFIG"); p && !p->empty()) path = *p;
  }
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError(ConfigErrc::IoFailure, "", "cannot read config file " + path->string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
      auto values = flatten(ss.str());
      // Relative paths in a config file are relative to the file itself.
      for (const auto* key : {"asr.mock_manifest", "llm.scenario", "actions.registry", "robot.gestures",
                              "robot.event_log", "hub.log_path", "pipeline.summary_path"}) {
        const auto it = values.find(key);
        if (it == values.end() || !it->second.is_string()) continue;
        const std::filesystem::path value = it->second.get<std::string>();
        if (!value.empty() && value.is_relative()) {
          it->second = (path->parent_path() / value).lexically_normal().string();
        }
      }
      merge(s, values);
    } catch (const ConfigError& e) {
      throw ConfigError(e.code(), e.key(), path->string() + ": " + e.what());
    }
  }
  if (auto k = env("PGPT_ASR_API_KEY")) s.asr.api_key = *k;
  if (auto k = env("PGPT_LLM_API_KEY")) s.llm.api_key = *k;
  merge(s, overrides);

  try {
    s.gate.validate();
  } catch (const Error& e) {
    throw ConfigError(ConfigErrc::InvalidValue, "gate", e.what());
  }
  check_backend(s.asr.backend, "asr.backend");
  check_backend(s.llm.backend, "llm.backend");
  check_positive(s.pipeline.empty_retry_limit, "pipeline.empty_retry_limit");
  check_positive(s.pipeline.end_flag_timeout_ms, "pipeline.end_flag_timeout_ms");
  check_positive(s.pipeline.resend_interval_ms, "pipeline.resend_interval_ms");
  check_positive(s.pipeline.heartbeat_ms, "pipeline.heartbeat_ms");
  check_positive(s.hub.heartbeat_interval_ms, "hub.heartbeat_interval_ms");
  check_positive(s.hub.missed_heartbeats, "hub.missed_heartbeats");
  check_positive(s.hub.write_timeout_ms, "hub.write_timeout_ms");
  check_positive(s.hub.observer_outbox_limit, "hub.observer_outbox_limit");
  check_positive(s.llm.history_exchanges, "llm.history_exchanges");
  check_positive(s.asr.timeout_ms, "asr.timeout_ms");
  check_positive(s.llm.timeout_ms, "llm.timeout_ms");
  return s;
}

}  // namespace pgpt::config
