#include "pgpt/action_registry.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pgpt/text.hpp"

namespace pgpt {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RegistryError(RegistryErrc::IoFailure, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

[[noreturn]] void invalid(std::size_t index, const std::string& why) {
  throw RegistryError(RegistryErrc::InvalidEntry, "entry " + std::to_string(index) + ": " + why);
}

}  // namespace

ActionRegistry::ActionRegistry(std::vector<ActionDef> actions) : actions_(std::move(actions)) {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    const auto& a = actions_[i];
    if (a.id.empty()) invalid(i, "empty action_id");
    if (a.duration_ms <= 0) invalid(i, "duration_ms must be positive");
    if (!ids.insert(a.id).second) throw RegistryError(RegistryErrc::DuplicateId, "duplicate action_id '" + a.id + "'");
  }
}

ActionRegistry ActionRegistry::seed() {
  return ActionRegistry({
      {"wave", {"wave", "wave hello"}, 2000, "Raise the right arm and wave the hand side to side."},
      {"handshake", {"handshake", "shake hands", "shake my hand", "shake hand"}, 3000,
       "Extend the right hand for a handshake."},
      {"bow", {"bow", "take a bow"}, 2500, "Bend forward at the hip and straighten up."},
      {"dance", {"dance", "boogie"}, 6000, "Short dance routine with arm swings and hip turns."},
      {"nod", {"nod", "nod your head"}, 1200, "Nod the head twice."},
      {"shake_head", {"shake your head", "shake head"}, 1500, "Turn the head left and right."},
      {"raise_arms", {"raise your arms", "raise arms", "arms up", "hands up"}, 2000, "Lift both arms overhead."},
      {"point", {"point", "point at"}, 1500, "Point forward with the right arm."},
  });
}

ActionRegistry ActionRegistry::from_json(std::string_view json_text) {
  const auto doc = nlohmann::json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) {
    throw RegistryError(RegistryErrc::InvalidEntry, "registry must be a JSON array");
  }
  std::vector<ActionDef> actions;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    if (!obj.is_object()) invalid(i, "not an object");
    ActionDef a;
    if (!obj.contains("action_id") || !obj["action_id"].is_string()) invalid(i, "action_id must be a string");
    a.id = obj["action_id"].get<std::string>();
    if (obj.contains("keywords")) {
      if (!obj["keywords"].is_array()) invalid(i, "keywords must be an array");
      for (const auto& k : obj["keywords"]) {
        if (!k.is_string()) invalid(i, "keywords must be strings");
        a.keywords.push_back(k.get<std::string>());
      }
    }
    if (!obj.contains("duration_ms") || !obj["duration_ms"].is_number_integer()) {
      invalid(i, "duration_ms must be an integer");
    }
    a.duration_ms = obj["duration_ms"].get<std::int64_t>();
    if (obj.contains("description")) {
      if (!obj["description"].is_string()) invalid(i, "description must be a string");
      a.description = obj["description"].get<std::string>();
    }
    actions.push_back(std::move(a));
  }
  return ActionRegistry(std::move(actions));
}

ActionRegistry ActionRegistry::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

const ActionDef* ActionRegistry::find(std::string_view id) const noexcept {
  for (const auto& a : actions_) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

std::string ActionRegistry::to_json() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& a : actions_) {
    nlohmann::ordered_json j;
    j["action_id"] = a.id;
    j["keywords"] = a.keywords;
    j["duration_ms"] = a.duration_ms;
    j["description"] = a.description;
    out.push_back(std::move(j));
  }
  return out.dump(2);
}

std::vector<GestureRule> default_gesture_rules() {
  return {
      {"hello", "greet_gesture"},        {"hi", "greet_gesture"},          {"goodbye", "farewell_gesture"},
      {"bye", "farewell_gesture"},       {"yes", "affirm_gesture"},        {"no", "negate_gesture"},
      {"great", "enthusiastic_gesture"}, {"think", "ponder_gesture"},      {"me", "self_gesture"},
  };
}

std::vector<GestureRule> parse_gesture_rules(std::string_view json_text) {
  const auto doc = nlohmann::json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) {
    throw RegistryError(RegistryErrc::InvalidEntry, "gesture rules must be a JSON array");
  }
  std::vector<GestureRule> rules;
  std::set<std::string> triggers;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    if (!obj.is_object() || !obj.contains("trigger_word") || !obj["trigger_word"].is_string() ||
        !obj.contains("gesture_name") || !obj["gesture_name"].is_string()) {
      invalid(i, "expected {\"trigger_word\": string, \"gesture_name\": string}");
    }
    GestureRule r{obj["trigger_word"].get<std::string>(), obj["gesture_name"].get<std::string>()};
    // Triggers match on normalized words, so "Hi" and "hi" are the same trigger.
    std::string key;
    for (const auto& w : text::tokenize_words(r.trigger_word)) key += (key.empty() ? "" : " ") + w;
    if (key.empty()) invalid(i, "trigger_word has no words");
    if (!triggers.insert(key).second) {
      throw RegistryError(RegistryErrc::DuplicateId, "duplicate trigger_word '" + r.trigger_word + "'");
    }
    rules.push_back(std::move(r));
  }
  return rules;
}

std::vector<GestureRule> load_gesture_rules(const std::filesystem::path& path) {
  return parse_gesture_rules(read_file(path));
}

}  // namespace pgpt
