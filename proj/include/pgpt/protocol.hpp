#pragma once

// Line-framed, prefix-routed wire format shared by the hub and its clients.
//
//   <symbol>|<payload>\n
//
// symbol is one of R S A E P T X H; payload is UTF-8 without raw LF bytes
// and at most kMaxPayloadBytes long. Most payloads carry an Envelope: a
// single-line JSON object {"turn":N,"sender":"...","<field>":"..."}.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "pgpt/error.hpp"

namespace pgpt::protocol {

enum class MessageKind : std::uint8_t {
  Register,        // R
  SpeechReply,     // S
  ActionCommand,   // A
  EndFlag,         // E
  RePrompt,        // P
  TextInjection,   // T
  StateBroadcast,  // X
  Heartbeat,       // H
};

inline constexpr std::array<MessageKind, 8> kAllKinds = {
    MessageKind::Register,      MessageKind::SpeechReply, MessageKind::ActionCommand,
    MessageKind::EndFlag,       MessageKind::RePrompt,    MessageKind::TextInjection,
    MessageKind::StateBroadcast, MessageKind::Heartbeat,
};

inline constexpr std::size_t kMaxPayloadBytes = 65536;
inline constexpr char kSeparator = '|';
inline constexpr char kTerminator = '\n';

char to_symbol(MessageKind kind) noexcept;
std::optional<MessageKind> kind_from_symbol(char symbol) noexcept;
std::string_view kind_name(MessageKind kind) noexcept;

struct Frame {
  MessageKind kind = MessageKind::Heartbeat;
  std::string payload;

  bool operator==(const Frame&) const = default;
};

enum class ProtocolErrc {
  PayloadTooLong,
  PayloadContainsNewline,
  InvalidUtf8,
  UnknownPrefix,
  MissingSeparator,
  MalformedEnvelope,
};

std::string_view errc_name(ProtocolErrc code) noexcept;

class ProtocolError : public CodedError<ProtocolErrc> {
 public:
  using CodedError::CodedError;
};

bool is_valid_utf8(std::string_view bytes) noexcept;

// Returns the serialized frame including the trailing LF.
std::string encode_frame(const Frame& frame);

// Decodes one line. The terminator must already be stripped.
Frame decode_frame(std::string_view line);

enum class EndStatus { Ok, Failed };

std::string_view to_string(EndStatus status) noexcept;

// Name of the kind-specific body field, or empty for kinds without one
// (R and H).
std::string_view body_field(MessageKind kind) noexcept;

struct Envelope {
  std::uint64_t turn = 0;
  std::string sender;
  // Value of the kind-specific field. For E frames it is "ok" or "failed".
  std::string body;

  bool operator==(const Envelope&) const = default;
};

std::string encode_envelope(MessageKind kind, const Envelope& envelope);
Envelope decode_envelope(MessageKind kind, std::string_view payload);

Frame make_frame(MessageKind kind, const Envelope& envelope);

// Convenience accessor: the envelope of a decoded frame.
inline Envelope envelope_of(const Frame& frame) { return decode_envelope(frame.kind, frame.payload); }

}  // namespace pgpt::protocol
