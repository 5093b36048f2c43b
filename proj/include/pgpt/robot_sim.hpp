#pragma once

// Simulated robot controller.
//
// Receives A (action), S (speech) and P (re-prompt) frames, walks the state
// machine Idle -> Listening -> Thinking -> {Acting | Speaking} -> Idle, and
// answers every accepted command with exactly one E frame. Time comes from an
// injected Clock; with a VirtualClock the event log is fully deterministic.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pgpt/action_registry.hpp"
#include "pgpt/error.hpp"
#include "pgpt/protocol.hpp"

namespace pgpt::robot {

enum class RobotState { Idle, Listening, Thinking, Speaking, Acting };

std::string_view to_string(RobotState state) noexcept;
bool is_legal_transition(RobotState from, RobotState to) noexcept;

inline constexpr std::int64_t kMinSpeechMs = 800;
inline constexpr std::int64_t kMsPerWord = 60;
inline constexpr std::int64_t kThinkingGesturePeriodMs = 1500;
inline constexpr std::string_view kRePromptLine = "Sorry, I didn't catch that \xE2\x80\x94 could you say it again?";
inline constexpr std::string_view kSenderName = "controller";

std::int64_t speech_duration_ms(std::string_view text);

struct PlannedGesture {
  std::int64_t offset_ms;
  std::size_t word_index;
  std::string gesture_name;
  std::string trigger_word;
};

// One gesture per rule whose trigger word occurs in the text, placed at the
// first occurrence's proportional offset into the speech, in word order.
std::vector<PlannedGesture> plan_gestures(std::string_view text, const std::vector<GestureRule>& rules,
                                          std::int64_t duration_ms);

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() const = 0;
};

class VirtualClock final : public Clock {
 public:
  std::int64_t now_ms() const override { return now_; }
  void advance(std::int64_t ms) { now_ += ms; }
  void set(std::int64_t ms) {
    if (ms > now_) now_ = ms;
  }

 private:
  std::int64_t now_ = 0;
};

class SteadyClock final : public Clock {
 public:
  SteadyClock();
  std::int64_t now_ms() const override;

 private:
  std::int64_t origin_ns_;
};

struct RobotEvent {
  std::int64_t sim_ms = 0;
  std::string kind;
  std::string detail;

  // "<sim_ms> <kind> <detail>"
  std::string to_line() const;
  bool operator==(const RobotEvent&) const = default;
};

enum class RobotErrc { IllegalTransition };

class RobotError : public CodedError<RobotErrc> {
 public:
  using CodedError::CodedError;
};

class RobotSim {
 public:
  using FrameSink = std::function<void(const protocol::Frame&)>;
  using EventSink = std::function<void(const RobotEvent&)>;

  RobotSim(ActionRegistry registry, std::vector<GestureRule> gestures, const Clock& clock, FrameSink frames = {},
           EventSink events = {});

  // Dispatches A, S and P frames; other kinds are ignored. Calls poll() first.
  void handle_frame(const protocol::Frame& frame);

  void enter_listening();
  // Listening -> Thinking; throws RobotError(IllegalTransition) otherwise.
  void enter_thinking();

  void execute_action(const std::string& action_id, std::uint64_t turn);
  void speak(const std::string& text, std::uint64_t turn);
  void handle_prompt(std::uint64_t turn);

  // Emits everything scheduled at or before clock.now_ms().
  void poll();

  // Next time at which poll() has work: a completion, a speech gesture, or
  // the next thinking gesture.
  std::optional<std::int64_t> next_deadline() const;

  // Acting or Speaking.
  bool busy() const noexcept;
  RobotState state() const noexcept { return state_; }
  const std::vector<RobotEvent>& events() const noexcept { return events_; }
  std::string event_log() const;
  std::uint64_t end_flags_sent() const noexcept { return end_flags_; }
  std::uint64_t protocol_violations() const noexcept { return violations_; }

 private:
  enum class ActivityKind { Action, Speech, Prompt };

  struct Activity {
    ActivityKind kind;
    std::vector<std::uint64_t> turns;
    std::string detail;
    std::int64_t end_ms;
  };

  struct Scheduled {
    std::int64_t at_ms;
    std::string kind;
    std::string detail;
  };

  void log(std::int64_t at, std::string kind, std::string detail);
  void transition(RobotState to, std::int64_t at);
  void walk_to_thinking(std::int64_t at);
  void emit_thinking_gestures(std::int64_t upto);
  void start_speech(ActivityKind kind, const std::string& text, std::vector<std::uint64_t> turns, std::int64_t at);
  void send_end_flag(std::uint64_t turn, protocol::EndStatus status, std::int64_t at);
  void finish_activity();
  bool reject_if_busy(std::string_view what, std::uint64_t turn);

  ActionRegistry registry_;
  std::vector<GestureRule> gestures_;
  const Clock& clock_;
  FrameSink frame_sink_;
  EventSink event_sink_;

  RobotState state_ = RobotState::Idle;
  std::uint64_t current_turn_ = 0;
  std::int64_t next_thinking_gesture_ = 0;
  std::optional<Activity> activity_;
  std::vector<Scheduled> scheduled_;  // sorted by at_ms, stable
  std::vector<std::uint64_t> deferred_prompts_;
  std::vector<RobotEvent> events_;
  std::uint64_t end_flags_ = 0;
  std::uint64_t violations_ = 0;
};

}  // namespace pgpt::robot
