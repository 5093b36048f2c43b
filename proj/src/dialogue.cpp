#include "pgpt/dialogue.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "pgpt/text.hpp"

namespace pgpt::dialogue {

std::string_view to_string(Mode mode) noexcept { return mode == Mode::Action ? "action" : "speech"; }

std::string_view to_string(ChatRole role) noexcept {
  switch (role) {
    case ChatRole::System: return "system";
    case ChatRole::User: return "user";
    case ChatRole::Assistant: return "assistant";
  }
  return "user";
}

std::string_view errc_name(DialogueErrc code) noexcept {
  switch (code) {
    case DialogueErrc::ResponderUnreachable: return "ResponderUnreachable";
    case DialogueErrc::ResponderRejected: return "ResponderRejected";
    case DialogueErrc::NoActionMatched: return "NoActionMatched";
    case DialogueErrc::InvalidScenario: return "InvalidScenario";
  }
  return "Unknown";
}

History::History(std::string system_prompt, std::size_t max_exchanges) : max_exchanges_(max_exchanges) {
  messages_.push_back({ChatRole::System, std::move(system_prompt)});
}

void History::append_exchange(std::string user, std::string assistant) {
  messages_.push_back({ChatRole::User, std::move(user)});
  messages_.push_back({ChatRole::Assistant, std::move(assistant)});
  while (exchanges() > max_exchanges_) {
    messages_.erase(messages_.begin() + 1, messages_.begin() + 3);
  }
}

namespace {

const std::vector<std::vector<std::string>>& cue_phrases() {
  static const std::vector<std::vector<std::string>> cues = {{"please"}, {"can", "you"}, {"could", "you"}};
  return cues;
}

std::string script_key(std::string_view s) { return text::to_lower_ascii(text::trim(s)); }

}  // namespace

std::vector<KeywordMatch> find_keywords(const std::vector<std::string>& tokens, const ActionRegistry& registry) {
  std::vector<KeywordMatch> matches;
  const auto& actions = registry.actions();
  for (std::size_t a = 0; a < actions.size(); ++a) {
    for (const auto& keyword : actions[a].keywords) {
      const auto phrase = text::tokenize_words(keyword);
      for (auto pos = text::find_phrase(tokens, phrase); pos != std::string::npos;
           pos = text::find_phrase(tokens, phrase, pos + 1)) {
        matches.push_back({a, pos});
      }
    }
  }
  return matches;
}

Mode classify(std::string_view utterance, const ActionRegistry& registry) {
  const auto tokens = text::tokenize_words(utterance);
  const auto matches = find_keywords(tokens, registry);
  if (matches.empty()) return Mode::Speech;

  // Earliest token index at which some cue phrase has ended.
  std::size_t first_cue_end = std::string::npos;
  for (const auto& cue : cue_phrases()) {
    const auto pos = text::find_phrase(tokens, cue);
    if (pos != std::string::npos) first_cue_end = std::min(first_cue_end, pos + cue.size());
  }
  for (const auto& m : matches) {
    if (m.position == 0) return Mode::Action;
    if (first_cue_end != std::string::npos && first_cue_end <= m.position) return Mode::Action;
  }
  return Mode::Speech;
}

ActionCommand extract_action(std::string_view utterance, const ActionRegistry& registry) {
  const auto tokens = text::tokenize_words(utterance);
  const auto matches = find_keywords(tokens, registry);
  if (matches.empty()) {
    throw DialogueError(DialogueErrc::NoActionMatched, "no registry keyword in '" + std::string(utterance) + "'");
  }
  std::size_t best = matches.front().action_index;
  for (const auto& m : matches) best = std::min(best, m.action_index);
  return ActionCommand{registry.actions()[best].id};
}

Reply generate_reply(History& history, std::string_view utterance, Responder& responder) {
  std::vector<ChatMessage> request = history.messages();
  request.push_back({ChatRole::User, std::string(utterance)});
  auto reply = responder.complete(request);
  if (text::trim(reply).empty()) {
    throw DialogueError(DialogueErrc::ResponderRejected, "responder returned an empty reply");
  }
  history.append_exchange(std::string(utterance), reply);
  return Reply{std::move(reply)};
}

std::optional<Verdict> parse_verdict(std::string_view response, const ActionRegistry& registry) {
  static const std::regex pattern(R"(ACTION:\s*([A-Za-z0-9_]+)|\bSPEECH\b)");
  const std::string s(response);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), pattern); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (!m[1].matched) return Verdict{Mode::Speech, std::nullopt};
    auto id = text::to_lower_ascii(m[1].str());
    if (registry.contains(id)) return Verdict{Mode::Action, std::move(id)};
  }
  return std::nullopt;
}

CheckResult double_check(std::string_view utterance, Mode initial_mode, Responder& responder,
                         const ActionRegistry& registry) {
  std::string instruction(kVerificationPrompt);
  instruction += "\nAvailable action ids:";
  for (const auto& a : registry.actions()) instruction += " " + a.id;

  const std::vector<ChatMessage> request = {{ChatRole::System, std::move(instruction)},
                                            {ChatRole::User, std::string(utterance)}};
  std::string response;
  try {
    response = responder.complete(request);
  } catch (const DialogueError& e) {
    spdlog::warn("double-check skipped, verifier failed: {}", e.what());
    return CheckResult{initial_mode, std::nullopt, false};
  }

  const auto verdict = parse_verdict(response, registry);
  if (!verdict || verdict->mode == initial_mode) return CheckResult{initial_mode, std::nullopt, false};
  if (verdict->mode == Mode::Action) return CheckResult{Mode::Action, ActionCommand{*verdict->action_id}, true};
  return CheckResult{Mode::Speech, std::nullopt, true};
}

TurnOutcome step(History& history, const Utterance& utterance, Responder& responder, const ActionRegistry& registry) {
  const Mode initial = classify(utterance.text, registry);
  const auto check = double_check(utterance.text, initial, responder, registry);

  if (check.mode == Mode::Action) {
    if (check.action) return TurnOutcome{*check.action, check.corrected};
    try {
      return TurnOutcome{extract_action(utterance.text, registry), check.corrected};
    } catch (const DialogueError& e) {
      if (e.code() != DialogueErrc::NoActionMatched) throw;
    }
  }
  return TurnOutcome{generate_reply(history, utterance.text, responder), check.corrected};
}

MockResponder::MockResponder(Script script) : script_(std::move(script)) {
  auto rekey = [](std::map<std::string, std::string>& m) {
    std::map<std::string, std::string> out;
    for (auto& [k, v] : m) out[script_key(k)] = std::move(v);
    m = std::move(out);
  };
  rekey(script_.replies);
  rekey(script_.verdicts);
}

MockResponder MockResponder::from_json(std::string_view json_text) {
  const auto doc = nlohmann::json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw DialogueError(DialogueErrc::InvalidScenario, "scenario must be a JSON object");
  }
  Script script;
  if (auto it = doc.find("default_reply"); it != doc.end()) {
    if (!it->is_string()) throw DialogueError(DialogueErrc::InvalidScenario, "default_reply must be a string");
    script.default_reply = it->get<std::string>();
  }
  if (auto it = doc.find("default_verdict"); it != doc.end()) {
    if (!it->is_string()) throw DialogueError(DialogueErrc::InvalidScenario, "default_verdict must be a string");
    script.default_verdict = it->get<std::string>();
  }
  if (auto it = doc.find("entries"); it != doc.end()) {
    if (!it->is_array()) throw DialogueError(DialogueErrc::InvalidScenario, "entries must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& e = (*it)[i];
      if (!e.is_object() || !e.contains("utterance") || !e["utterance"].is_string()) {
        throw DialogueError(DialogueErrc::InvalidScenario, "entry " + std::to_string(i) + ": utterance missing");
      }
      const auto key = e["utterance"].get<std::string>();
      if (e.contains("reply")) {
        if (!e["reply"].is_string()) throw DialogueError(DialogueErrc::InvalidScenario, "reply must be a string");
        script.replies[key] = e["reply"].get<std::string>();
      }
      if (e.contains("verdict")) {
        if (!e["verdict"].is_string()) throw DialogueError(DialogueErrc::InvalidScenario, "verdict must be a string");
        script.verdicts[key] = e["verdict"].get<std::string>();
      }
    }
  }
  return MockResponder(std::move(script));
}

MockResponder MockResponder::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DialogueError(DialogueErrc::InvalidScenario, "cannot read scenario " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string MockResponder::complete(std::span<const ChatMessage> messages) {
  ++calls_;
  std::string last_user;
  for (const auto& m : messages) {
    if (m.role == ChatRole::User) last_user = m.content;
  }
  const auto key = script_key(last_user);
  const bool verification = !messages.empty() && messages.front().role == ChatRole::System &&
                            messages.front().content.starts_with(kVerificationPrompt);
  if (verification) {
    auto it = script_.verdicts.find(key);
    return it != script_.verdicts.end() ? it->second : script_.default_verdict;
  }
  if (auto it = script_.replies.find(key); it != script_.replies.end()) return it->second;
  return script_.default_reply.value_or("");
}

}  // namespace pgpt::dialogue
