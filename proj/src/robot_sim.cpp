#include "pgpt/robot_sim.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "pgpt/text.hpp"

namespace pgpt::robot {

using protocol::EndStatus;
using protocol::MessageKind;

std::string_view to_string(RobotState state) noexcept {
  switch (state) {
    case RobotState::Idle: return "Idle";
    case RobotState::Listening: return "Listening";
    case RobotState::Thinking: return "Thinking";
    case RobotState::Speaking: return "Speaking";
    case RobotState::Acting: return "Acting";
  }
  return "?";
}

bool is_legal_transition(RobotState from, RobotState to) noexcept {
  switch (from) {
    case RobotState::Idle: return to == RobotState::Listening;
    case RobotState::Listening: return to == RobotState::Thinking;
    case RobotState::Thinking:
      return to == RobotState::Speaking || to == RobotState::Acting || to == RobotState::Idle;
    case RobotState::Speaking:
    case RobotState::Acting: return to == RobotState::Idle;
  }
  return false;
}

std::int64_t speech_duration_ms(std::string_view text) {
  const auto words = static_cast<std::int64_t>(text::tokenize_words(text).size());
  return std::max(kMinSpeechMs, kMsPerWord * words);
}

std::vector<PlannedGesture> plan_gestures(std::string_view text, const std::vector<GestureRule>& rules,
                                          std::int64_t duration_ms) {
  const auto tokens = text::tokenize_words(text);
  std::vector<PlannedGesture> out;
  if (tokens.empty()) return out;
  const auto n = static_cast<std::int64_t>(tokens.size());
  for (const auto& rule : rules) {
    const auto phrase = text::tokenize_words(rule.trigger_word);
    const auto pos = text::find_phrase(tokens, phrase);
    if (pos == std::string::npos) continue;
    out.push_back({duration_ms * static_cast<std::int64_t>(pos) / n, pos, rule.gesture_name, rule.trigger_word});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const PlannedGesture& a, const PlannedGesture& b) { return a.word_index < b.word_index; });
  return out;
}

SteadyClock::SteadyClock()
    : origin_ns_(std::chrono::duration_cast<std::chrono::nanoseconds>(
                     std::chrono::steady_clock::now().time_since_epoch())
                     .count()) {}

std::int64_t SteadyClock::now_ms() const {
  const auto ns =
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
          .count();
  return (ns - origin_ns_) / 1'000'000;
}

std::string RobotEvent::to_line() const {
  std::string line = std::to_string(sim_ms) + " " + kind;
  if (!detail.empty()) line += " " + detail;
  return line;
}

RobotSim::RobotSim(ActionRegistry registry, std::vector<GestureRule> gestures, const Clock& clock, FrameSink frames,
                   EventSink events)
    : registry_(std::move(registry)),
      gestures_(std::move(gestures)),
      clock_(clock),
      frame_sink_(std::move(frames)),
      event_sink_(std::move(events)) {}

void RobotSim::log(std::int64_t at, std::string kind, std::string detail) {
  events_.push_back({at, std::move(kind), std::move(detail)});
  if (event_sink_) event_sink_(events_.back());
}

void RobotSim::transition(RobotState to, std::int64_t at) {
  if (!is_legal_transition(state_, to)) {
    throw RobotError(RobotErrc::IllegalTransition, "illegal transition " + std::string(to_string(state_)) + " -> " +
                                                       std::string(to_string(to)));
  }
  state_ = to;
  if (to == RobotState::Thinking) next_thinking_gesture_ = at + kThinkingGesturePeriodMs;
  log(at, "state", std::string(to_string(to)));
  if (frame_sink_) {
    frame_sink_(protocol::make_frame(MessageKind::StateBroadcast,
                                     {current_turn_, std::string(kSenderName), std::string(to_string(to))}));
  }
}

void RobotSim::walk_to_thinking(std::int64_t at) {
  if (state_ == RobotState::Idle) transition(RobotState::Listening, at);
  if (state_ == RobotState::Listening) transition(RobotState::Thinking, at);
}

void RobotSim::emit_thinking_gestures(std::int64_t upto) {
  while (state_ == RobotState::Thinking && next_thinking_gesture_ <= upto) {
    log(next_thinking_gesture_, "gesture", "thinking");
    next_thinking_gesture_ += kThinkingGesturePeriodMs;
  }
}

void RobotSim::poll() {
  const auto now = clock_.now_ms();
  emit_thinking_gestures(now);
  for (;;) {
    if (!scheduled_.empty() && scheduled_.front().at_ms <= now &&
        (!activity_ || scheduled_.front().at_ms <= activity_->end_ms)) {
      auto item = std::move(scheduled_.front());
      scheduled_.erase(scheduled_.begin());
      log(item.at_ms, std::move(item.kind), std::move(item.detail));
      continue;
    }
    if (activity_ && activity_->end_ms <= now) {
      finish_activity();
      continue;
    }
    break;
  }
}

void RobotSim::finish_activity() {
  auto done = std::move(*activity_);
  activity_.reset();
  const auto at = done.end_ms;
  switch (done.kind) {
    case ActivityKind::Action: log(at, "action_done", done.detail); break;
    case ActivityKind::Speech: log(at, "speech_done", ""); break;
    case ActivityKind::Prompt: log(at, "reprompt_done", ""); break;
  }
  transition(RobotState::Idle, at);
  for (auto turn : done.turns) send_end_flag(turn, EndStatus::Ok, at);

  if (!deferred_prompts_.empty()) {
    auto turns = std::move(deferred_prompts_);
    deferred_prompts_.clear();
    current_turn_ = turns.front();
    start_speech(ActivityKind::Prompt, std::string(kRePromptLine), std::move(turns), at);
  }
}

void RobotSim::send_end_flag(std::uint64_t turn, EndStatus status, std::int64_t at) {
  ++end_flags_;
  log(at, "end_flag", "turn=" + std::to_string(turn) + " status=" + std::string(protocol::to_string(status)));
  if (frame_sink_) {
    frame_sink_(protocol::make_frame(MessageKind::EndFlag,
                                     {turn, std::string(kSenderName), std::string(protocol::to_string(status))}));
  }
}

void RobotSim::start_speech(ActivityKind kind, const std::string& text, std::vector<std::uint64_t> turns,
                            std::int64_t at) {
  walk_to_thinking(at);
  transition(RobotState::Speaking, at);
  const auto duration = speech_duration_ms(text);
  log(at, kind == ActivityKind::Prompt ? "reprompt_start" : "speech_start", text);
  for (auto& g : plan_gestures(text, gestures_, duration)) {
    scheduled_.push_back({at + g.offset_ms, "gesture", g.gesture_name});
  }
  activity_ = Activity{kind, std::move(turns), text, at + duration};
}

bool RobotSim::reject_if_busy(std::string_view what, std::uint64_t turn) {
  if (!busy()) return false;
  ++violations_;
  log(clock_.now_ms(), "protocol_violation",
      std::string(what) + " turn=" + std::to_string(turn) + " while " + std::string(to_string(state_)));
  return true;
}

bool RobotSim::busy() const noexcept { return state_ == RobotState::Acting || state_ == RobotState::Speaking; }

void RobotSim::enter_listening() {
  poll();
  transition(RobotState::Listening, clock_.now_ms());
}

void RobotSim::enter_thinking() {
  poll();
  if (state_ != RobotState::Listening) {
    throw RobotError(RobotErrc::IllegalTransition,
                     "enter_thinking from " + std::string(to_string(state_)) + " (expected Listening)");
  }
  transition(RobotState::Thinking, clock_.now_ms());
}

void RobotSim::execute_action(const std::string& action_id, std::uint64_t turn) {
  poll();
  if (reject_if_busy("action", turn)) return;
  const auto now = clock_.now_ms();
  current_turn_ = turn;
  walk_to_thinking(now);

  const auto* def = registry_.find(action_id);
  if (!def) {
    log(now, "action_unknown", action_id);
    log(now, "apology", "Sorry, I don't know how to do '" + action_id + "' yet.");
    transition(RobotState::Idle, now);
    send_end_flag(turn, EndStatus::Failed, now);
    return;
  }
  transition(RobotState::Acting, now);
  log(now, "action_start", action_id);
  activity_ = Activity{ActivityKind::Action, {turn}, action_id, now + def->duration_ms};
}

void RobotSim::speak(const std::string& text, std::uint64_t turn) {
  poll();
  if (reject_if_busy("speech", turn)) return;
  current_turn_ = turn;
  start_speech(ActivityKind::Speech, text, {turn}, clock_.now_ms());
}

void RobotSim::handle_prompt(std::uint64_t turn) {
  poll();
  if (busy()) {
    log(clock_.now_ms(), deferred_prompts_.empty() ? "prompt_deferred" : "prompt_collapsed",
        "turn=" + std::to_string(turn));
    deferred_prompts_.push_back(turn);
    return;
  }
  current_turn_ = turn;
  start_speech(ActivityKind::Prompt, std::string(kRePromptLine), {turn}, clock_.now_ms());
}

void RobotSim::handle_frame(const protocol::Frame& frame) {
  if (frame.kind != MessageKind::ActionCommand && frame.kind != MessageKind::SpeechReply &&
      frame.kind != MessageKind::RePrompt) {
    return;
  }
  protocol::Envelope env;
  try {
    env = protocol::envelope_of(frame);
  } catch (const protocol::ProtocolError& e) {
    poll();
    ++violations_;
    log(clock_.now_ms(), "protocol_violation", e.what());
    return;
  }
  switch (frame.kind) {
    case MessageKind::ActionCommand: execute_action(env.body, env.turn); break;
    case MessageKind::SpeechReply: speak(env.body, env.turn); break;
    default: handle_prompt(env.turn); break;
  }
}

std::optional<std::int64_t> RobotSim::next_deadline() const {
  std::optional<std::int64_t> best;
  auto consider = [&best](std::int64_t t) {
    if (!best || t < *best) best = t;
  };
  if (state_ == RobotState::Thinking) consider(next_thinking_gesture_);
  if (!scheduled_.empty()) consider(scheduled_.front().at_ms);
  if (activity_) consider(activity_->end_ms);
  return best;
}

std::string RobotSim::event_log() const {
  std::string out;
  for (const auto& e : events_) {
    out += e.to_line();
    out += '\n';
  }
  return out;
}

}  // namespace pgpt::robot
