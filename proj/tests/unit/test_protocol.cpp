#include <doctest.h>

#include <random>
#include <set>

#include "pgpt/protocol.hpp"

using namespace pgpt::protocol;

namespace {

ProtocolErrc decode_error(std::string_view line) {
  try {
    decode_frame(line);
  } catch (const ProtocolError& e) {
    return e.code();
  }
  FAIL("decode succeeded unexpectedly");
  return ProtocolErrc::MalformedEnvelope;
}

ProtocolErrc encode_error(const Frame& f) {
  try {
    encode_frame(f);
  } catch (const ProtocolError& e) {
    return e.code();
  }
  FAIL("encode succeeded unexpectedly");
  return ProtocolErrc::MalformedEnvelope;
}

}  // namespace

TEST_CASE("heartbeat frame encodes to three bytes") { CHECK(encode_frame({MessageKind::Heartbeat, ""}) == "H|\n"); }

TEST_CASE("end flag payload sits between prefix and terminator") {
  const std::string payload = R"({"turn":3,"sender":"controller","status":"ok"})";
  CHECK(encode_frame({MessageKind::EndFlag, payload}) == "E|" + payload + "\n");
  CHECK(make_frame(MessageKind::EndFlag, {3, "controller", "ok"}).payload == payload);
}

TEST_CASE("payload bound") {
  CHECK(encode_error({MessageKind::SpeechReply, std::string(70000, 'a')}) == ProtocolErrc::PayloadTooLong);
  CHECK_NOTHROW(encode_frame({MessageKind::SpeechReply, std::string(kMaxPayloadBytes, 'a')}));
  CHECK(encode_error({MessageKind::SpeechReply, std::string(kMaxPayloadBytes + 1, 'a')}) ==
        ProtocolErrc::PayloadTooLong);
}

TEST_CASE("encode rejects LF and invalid UTF-8") {
  CHECK(encode_error({MessageKind::SpeechReply, "a\nb"}) == ProtocolErrc::PayloadContainsNewline);
  CHECK(encode_error({MessageKind::SpeechReply, "\xC3"}) == ProtocolErrc::InvalidUtf8);
}

TEST_CASE("decode examples") {
  const auto f = decode_frame(R"(A|{"turn":1,"sender":"pipeline","action":"wave"})");
  CHECK(f.kind == MessageKind::ActionCommand);
  CHECK(envelope_of(f) == Envelope{1, "pipeline", "wave"});
  CHECK(decode_error("Q|x") == ProtocolErrc::UnknownPrefix);
  CHECK(decode_error("H") == ProtocolErrc::MissingSeparator);
  CHECK(decode_error("") == ProtocolErrc::UnknownPrefix);
  CHECK(decode_error("Hx") == ProtocolErrc::MissingSeparator);
  CHECK(decode_error("S|\xFF") == ProtocolErrc::InvalidUtf8);
  CHECK(decode_frame("H|") == Frame{MessageKind::Heartbeat, ""});
}

TEST_CASE("prefix to kind mapping is a bijection over eight symbols") {
  std::set<char> symbols;
  for (auto kind : kAllKinds) {
    const char s = to_symbol(kind);
    symbols.insert(s);
    REQUIRE(kind_from_symbol(s).has_value());
    CHECK(*kind_from_symbol(s) == kind);
  }
  CHECK(symbols == std::set<char>{'R', 'S', 'A', 'E', 'P', 'T', 'X', 'H'});
  int valid = 0;
  for (int c = 0; c < 256; ++c) valid += kind_from_symbol(static_cast<char>(c)).has_value() ? 1 : 0;
  CHECK(valid == 8);
}

TEST_CASE("envelope field names are fixed per kind") {
  CHECK(body_field(MessageKind::SpeechReply) == "text");
  CHECK(body_field(MessageKind::ActionCommand) == "action");
  CHECK(body_field(MessageKind::EndFlag) == "status");
  CHECK(body_field(MessageKind::RePrompt) == "reason");
  CHECK(body_field(MessageKind::StateBroadcast) == "state");
  CHECK(body_field(MessageKind::TextInjection) == "text");
  CHECK(body_field(MessageKind::Register).empty());
  CHECK(encode_envelope(MessageKind::Register, {0, "controller", ""}) == R"({"turn":0,"sender":"controller"})");
}

TEST_CASE("envelope round-trip and malformed envelopes") {
  const Envelope e{42, "pipeline", "h\xC3\xA9llo \"quoted\" \\ tab\t"};
  const auto f = make_frame(MessageKind::SpeechReply, e);
  CHECK(f.payload.find('\n') == std::string::npos);
  CHECK(envelope_of(decode_frame(encode_frame(f).substr(0, encode_frame(f).size() - 1))) == e);

  auto bad = [](MessageKind k, std::string_view payload) {
    try {
      decode_envelope(k, payload);
    } catch (const ProtocolError& err) {
      return err.code() == ProtocolErrc::MalformedEnvelope;
    }
    return false;
  };
  CHECK(bad(MessageKind::EndFlag, R"({"turn":1,"sender":"c","status":"maybe"})"));
  CHECK(bad(MessageKind::EndFlag, R"({"turn":-1,"sender":"c","status":"ok"})"));
  CHECK(bad(MessageKind::ActionCommand, R"({"turn":1,"sender":"p"})"));
  CHECK(bad(MessageKind::ActionCommand, R"({"turn":1,"action":"wave"})"));
  CHECK(bad(MessageKind::ActionCommand, "not json"));
  CHECK(bad(MessageKind::ActionCommand, "[1,2]"));
}

TEST_CASE("random valid frames round-trip") {
  std::mt19937_64 rng(7);
  const std::vector<std::string> pieces = {"a", "Z", " ", "|", "{", "\"", "\\", "\xC3\xA9", "\xE2\x80\x94",
                                           "\xF0\x9F\x98\x80", "\t", "\r", "0"};
  for (int i = 0; i < 2000; ++i) {
    Frame f{kAllKinds[rng() % kAllKinds.size()], ""};
    const auto len = rng() % 40;
    for (std::size_t k = 0; k < len; ++k) f.payload += pieces[rng() % pieces.size()];
    const auto bytes = encode_frame(f);
    REQUIRE(bytes.back() == '\n');
    CHECK(decode_frame(std::string_view(bytes).substr(0, bytes.size() - 1)) == f);
  }
}

TEST_CASE("random byte lines never escape as untyped errors") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5000; ++i) {
    std::string line(rng() % 64, '\0');
    for (auto& c : line) c = static_cast<char>(rng() % 256);
    if (i % 2 == 0 && line.size() >= 2) {
      line[0] = to_symbol(kAllKinds[rng() % 8]);
      line[1] = '|';
    }
    try {
      const auto f = decode_frame(line);
      CHECK(is_valid_utf8(f.payload));
    } catch (const ProtocolError&) {
    }
  }
}

TEST_CASE("utf8 validator rejects overlongs and surrogates") {
  CHECK(is_valid_utf8("plain"));
  CHECK(is_valid_utf8("\xE2\x80\x94"));
  CHECK_FALSE(is_valid_utf8("\xC0\xAF"));
  CHECK_FALSE(is_valid_utf8("\xED\xA0\x80"));
  CHECK_FALSE(is_valid_utf8("\xF4\x90\x80\x80"));
  CHECK_FALSE(is_valid_utf8("\xE2\x80"));
}
