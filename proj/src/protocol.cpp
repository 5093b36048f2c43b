#include "pgpt/protocol.hpp"

#include <nlohmann/json.hpp>

namespace pgpt::protocol {

namespace {

struct KindInfo {
  MessageKind kind;
  char symbol;
  std::string_view name;
  std::string_view field;
};

constexpr std::array<KindInfo, 8> kKindTable = {{
    {MessageKind::Register, 'R', "register", ""},
    {MessageKind::SpeechReply, 'S', "speech", "text"},
    {MessageKind::ActionCommand, 'A', "action", "action"},
    {MessageKind::EndFlag, 'E', "end", "status"},
    {MessageKind::RePrompt, 'P', "reprompt", "reason"},
    {MessageKind::TextInjection, 'T', "inject", "text"},
    {MessageKind::StateBroadcast, 'X', "state", "state"},
    {MessageKind::Heartbeat, 'H', "heartbeat", ""},
}};

const KindInfo& info(MessageKind kind) noexcept { return kKindTable[static_cast<std::size_t>(kind)]; }

[[noreturn]] void fail(ProtocolErrc code, const std::string& detail) {
  throw ProtocolError(code, std::string(errc_name(code)) + ": " + detail);
}

}  // namespace

char to_symbol(MessageKind kind) noexcept { return info(kind).symbol; }

std::optional<MessageKind> kind_from_symbol(char symbol) noexcept {
  for (const auto& entry : kKindTable) {
    if (entry.symbol == symbol) return entry.kind;
  }
  return std::nullopt;
}

std::string_view kind_name(MessageKind kind) noexcept { return info(kind).name; }

std::string_view body_field(MessageKind kind) noexcept { return info(kind).field; }

std::string_view errc_name(ProtocolErrc code) noexcept {
  switch (code) {
    case ProtocolErrc::PayloadTooLong: return "PayloadTooLong";
    case ProtocolErrc::PayloadContainsNewline: return "PayloadContainsNewline";
    case ProtocolErrc::InvalidUtf8: return "InvalidUtf8";
    case ProtocolErrc::UnknownPrefix: return "UnknownPrefix";
    case ProtocolErrc::MissingSeparator: return "MissingSeparator";
    case ProtocolErrc::MalformedEnvelope: return "MalformedEnvelope";
  }
  return "Unknown";
}

std::string_view to_string(EndStatus status) noexcept { return status == EndStatus::Ok ? "ok" : "failed"; }

bool is_valid_utf8(std::string_view bytes) noexcept {
  std::size_t i = 0;
  const std::size_t n = bytes.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    if (c < 0x80) {
      ++i;
      continue;
    }
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(bytes[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong encodings, surrogates and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) return false;
    if (cp >= 0xD800 && cp <= 0xDFFF) return false;
    if (cp > 0x10FFFF) return false;
    i += len;
  }
  return true;
}

std::string encode_frame(const Frame& frame) {
  if (frame.payload.size() > kMaxPayloadBytes) {
    fail(ProtocolErrc::PayloadTooLong, std::to_string(frame.payload.size()) + " bytes");
  }
  if (frame.payload.find(kTerminator) != std::string::npos) {
    fail(ProtocolErrc::PayloadContainsNewline, "payload contains a raw LF byte");
  }
  if (!is_valid_utf8(frame.payload)) fail(ProtocolErrc::InvalidUtf8, "payload is not valid UTF-8");

  std::string out;
  out.reserve(frame.payload.size() + 3);
  out.push_back(to_symbol(frame.kind));
  out.push_back(kSeparator);
  out.append(frame.payload);
  out.push_back(kTerminator);
  return out;
}

Frame decode_frame(std::string_view line) {
  if (line.empty()) fail(ProtocolErrc::UnknownPrefix, "empty line");
  const auto kind = kind_from_symbol(line[0]);
  if (!kind) fail(ProtocolErrc::UnknownPrefix, "leading byte is not a known prefix");
  if (line.size() < 2 || line[1] != kSeparator) fail(ProtocolErrc::MissingSeparator, "expected '|' after prefix");

  const auto payload = line.substr(2);
  if (payload.size() > kMaxPayloadBytes) fail(ProtocolErrc::PayloadTooLong, std::to_string(payload.size()) + " bytes");
  if (payload.find(kTerminator) != std::string_view::npos) {
    fail(ProtocolErrc::PayloadContainsNewline, "line contains an embedded LF");
  }
  if (!is_valid_utf8(payload)) fail(ProtocolErrc::InvalidUtf8, "payload is not valid UTF-8");
  return Frame{*kind, std::string(payload)};
}

std::string encode_envelope(MessageKind kind, const Envelope& envelope) {
  nlohmann::ordered_json j;
  j["turn"] = envelope.turn;
  j["sender"] = envelope.sender;
  const auto field = body_field(kind);
  if (!field.empty()) j[std::string(field)] = envelope.body;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

Envelope decode_envelope(MessageKind kind, std::string_view payload) {
  const auto j = nlohmann::json::parse(payload, nullptr, /*allow_exceptions=*/false);
  if (!j.is_object()) fail(ProtocolErrc::MalformedEnvelope, "payload is not a JSON object");

  Envelope env;
  if (auto it = j.find("turn"); it != j.end()) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
      fail(ProtocolErrc::MalformedEnvelope, "turn must be a non-negative integer");
    }
    env.turn = it->get<std::uint64_t>();
  }
  auto sender = j.find("sender");
  if (sender == j.end() || !sender->is_string()) fail(ProtocolErrc::MalformedEnvelope, "missing sender");
  env.sender = sender->get<std::string>();

  const auto field = body_field(kind);
  if (!field.empty()) {
    auto body = j.find(std::string(field));
    if (body == j.end() || !body->is_string()) {
      fail(ProtocolErrc::MalformedEnvelope, "missing string field '" + std::string(field) + "'");
    }
    env.body = body->get<std::string>();
    if (kind == MessageKind::EndFlag && env.body != "ok" && env.body != "failed") {
      fail(ProtocolErrc::MalformedEnvelope, "status must be ok or failed");
    }
  }
  return env;
}

Frame make_frame(MessageKind kind, const Envelope& envelope) {
  return Frame{kind, encode_envelope(kind, envelope)};
}

}  // namespace pgpt::protocol
