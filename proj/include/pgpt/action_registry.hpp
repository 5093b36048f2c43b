#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pgpt/error.hpp"

namespace pgpt {

// One pre-coded robot action. Keywords may be multi-word phrases; they are
// matched as whole-token runs after tokenization.
struct ActionDef {
  std::string id;
  std::vector<std::string> keywords;
  std::int64_t duration_ms = 0;
  std::string description;
};

struct GestureRule {
  std::string trigger_word;
  std::string gesture_name;
};

enum class RegistryErrc { InvalidEntry, DuplicateId, IoFailure };

class RegistryError : public CodedError<RegistryErrc> {
 public:
  using CodedError::CodedError;
};

// Ordered action set. Order matters: keyword lookups return the first entry
// that matches.
class ActionRegistry {
 public:
  ActionRegistry() = default;
  explicit ActionRegistry(std::vector<ActionDef> actions);

  // wave, handshake, bow, dance, nod, shake_head, raise_arms, point.
  static ActionRegistry seed();
  static ActionRegistry from_json(std::string_view json_text);
  static ActionRegistry load(const std::filesystem::path& path);

  const std::vector<ActionDef>& actions() const noexcept { return actions_; }
  const ActionDef* find(std::string_view id) const noexcept;
  bool contains(std::string_view id) const noexcept { return find(id) != nullptr; }
  bool empty() const noexcept { return actions_.empty(); }
  std::size_t size() const noexcept { return actions_.size(); }

  std::string to_json() const;

 private:
  std::vector<ActionDef> actions_;
};

std::vector<GestureRule> default_gesture_rules();
std::vector<GestureRule> parse_gesture_rules(std::string_view json_text);
std::vector<GestureRule> load_gesture_rules(const std::filesystem::path& path);

}  // namespace pgpt
