#pragma once

// Intent routing for transcribed utterances.
//
// Each turn is first classified locally (registry keyword plus an imperative
// cue), then verified by asking the responder a fixed yes/no-style question.
// Action turns produce an ActionCommand and leave the conversation history
// alone; speech turns ask the responder for a reply and extend the history.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pgpt/action_registry.hpp"
#include "pgpt/error.hpp"

namespace pgpt::dialogue {

enum class Mode { Action, Speech };

std::string_view to_string(Mode mode) noexcept;

enum class ChatRole { System, User, Assistant };

std::string_view to_string(ChatRole role) noexcept;

struct ChatMessage {
  ChatRole role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

inline constexpr std::string_view kDefaultSystemPrompt =
    "You are a friendly humanoid robot assistant. Keep replies under 60 words.";

inline constexpr std::string_view kVerificationPrompt =
    "Does the user request a physical action? Answer exactly ACTION:<id> or SPEECH.";

inline constexpr std::size_t kDefaultMaxExchanges = 20;

// Bounded conversation context: a leading system entry followed by
// alternating user/assistant pairs. The oldest pair is dropped first.
class History {
 public:
  explicit History(std::string system_prompt = std::string(kDefaultSystemPrompt),
                   std::size_t max_exchanges = kDefaultMaxExchanges);

  const std::vector<ChatMessage>& messages() const noexcept { return messages_; }
  std::size_t exchanges() const noexcept { return (messages_.size() - 1) / 2; }
  std::size_t max_exchanges() const noexcept { return max_exchanges_; }

  void append_exchange(std::string user, std::string assistant);

  bool operator==(const History&) const = default;

 private:
  std::vector<ChatMessage> messages_;
  std::size_t max_exchanges_;
};

struct Utterance {
  std::string text;
  std::uint64_t turn = 0;
};

struct ActionCommand {
  std::string action_id;
  bool operator==(const ActionCommand&) const = default;
};

struct Reply {
  std::string text;
  bool operator==(const Reply&) const = default;
};

struct TurnOutcome {
  std::variant<ActionCommand, Reply> result;
  bool mode_was_corrected = false;

  bool is_action() const noexcept { return std::holds_alternative<ActionCommand>(result); }
  Mode mode() const noexcept { return is_action() ? Mode::Action : Mode::Speech; }
};

enum class DialogueErrc { ResponderUnreachable, ResponderRejected, NoActionMatched, InvalidScenario };

std::string_view errc_name(DialogueErrc code) noexcept;

class DialogueError : public CodedError<DialogueErrc> {
 public:
  DialogueError(DialogueErrc code, const std::string& what, int status = 0) : CodedError(code, what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// Chat-completion contract. Throws DialogueError(ResponderUnreachable |
// ResponderRejected).
class Responder {
 public:
  virtual ~Responder() = default;
  virtual std::string complete(std::span<const ChatMessage> messages) = 0;
};

// Keyword and cue analysis, exposed for tests and diagnostics.
struct KeywordMatch {
  std::size_t action_index;  // into registry.actions()
  std::size_t position;      // token index where the keyword starts
};

std::vector<KeywordMatch> find_keywords(const std::vector<std::string>& tokens, const ActionRegistry& registry);

Mode classify(std::string_view utterance, const ActionRegistry& registry);

// First registry entry (registry order) with a keyword in the utterance.
// Throws DialogueError(NoActionMatched).
ActionCommand extract_action(std::string_view utterance, const ActionRegistry& registry);

// Appends (user, utterance) and (assistant, reply) on success only.
Reply generate_reply(History& history, std::string_view utterance, Responder& responder);

struct Verdict {
  Mode mode;
  std::optional<std::string> action_id;
};

// Scans a verifier response for ACTION:<id> (id in registry) or SPEECH,
// whichever comes first. nullopt when neither appears.
std::optional<Verdict> parse_verdict(std::string_view response, const ActionRegistry& registry);

struct CheckResult {
  Mode mode;
  std::optional<ActionCommand> action;  // set when the check flipped to Action
  bool corrected = false;
};

// Asks the responder to confirm the mode. A contradicting verdict wins. An
// unparseable answer or any responder failure leaves initial_mode in place.
CheckResult double_check(std::string_view utterance, Mode initial_mode, Responder& responder,
                         const ActionRegistry& registry);

// classify -> double_check -> extract_action | generate_reply.
TurnOutcome step(History& history, const Utterance& utterance, Responder& responder, const ActionRegistry& registry);

// Scripted responder for tests and offline runs. Chat requests are answered
// from `replies` keyed by the last user message; verification requests (first
// message equal to kVerificationPrompt) from `verdicts`. Keys are compared
// after trimming and lowercasing.
class MockResponder final : public Responder {
 public:
  struct Script {
    std::map<std::string, std::string> replies;
    std::map<std::string, std::string> verdicts;
    std::optional<std::string> default_reply;
    std::string default_verdict;
  };

  MockResponder() = default;
  explicit MockResponder(Script script);

  // {"default_reply": "...", "default_verdict": "...",
  //  "entries": [{"utterance": "...", "reply": "...", "verdict": "..."}]}
  static MockResponder from_json(std::string_view json_text);
  static MockResponder load(const std::filesystem::path& path);

  std::string complete(std::span<const ChatMessage> messages) override;

  std::size_t calls() const noexcept { return calls_; }

 private:
  Script script_;
  std::size_t calls_ = 0;
};

struct HttpResponderConfig {
  std::string endpoint;  // e.g. https://api.example.com/v1/chat/completions
  std::string model = "gpt-3.5-turbo";
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
};

// Chat-completion client: posts {"model", "messages"} and reads
// choices[0].message.content (or a top-level "text").
class HttpResponder final : public Responder {
 public:
  explicit HttpResponder(HttpResponderConfig config);
  std::string complete(std::span<const ChatMessage> messages) override;

 private:
  HttpResponderConfig config_;
};

}  // namespace pgpt::dialogue
