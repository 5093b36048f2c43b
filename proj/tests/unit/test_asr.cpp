#include <doctest.h>

#include "pgpt/asr.hpp"
#include "support.hpp"

using namespace pgpt::asr;

namespace {

MockManifestEntry entry(std::string id, std::string hyp, std::int64_t delay = 0) {
  return {id, "g", "audio/" + id + ".wav", "ref " + id, std::move(hyp), delay};
}

AsrErrc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const AsrError& e) {
    return e.code();
  }
  FAIL("no AsrError thrown");
  return AsrErrc::SchemaViolation;
}

}  // namespace

TEST_CASE("mock transcription with injected delay") {
  MockTranscriber mock({entry("gm", "good morning", 120)});
  const auto r = transcribe({"gm", "", {}}, mock);
  CHECK(r.text == "good morning");
  CHECK(r.backend_id == "mock");
  CHECK(r.recognition_time_ms >= 120.0);
  CHECK(r.recognition_time_ms <= 170.0);
}

TEST_CASE("empty hypothesis is an EmptyTranscription error") {
  MockTranscriber mock({entry("e", ""), entry("w", "  \t ")});
  CHECK(code_of([&] { transcribe({"e", "", {}}, mock); }) == AsrErrc::EmptyTranscription);
  CHECK(code_of([&] { transcribe({"w", "", {}}, mock); }) == AsrErrc::EmptyTranscription);
}

TEST_CASE("mock lookup by id then path, unknown input rejected") {
  MockTranscriber mock({entry("a", "alpha"), entry("b", "beta")});
  CHECK(transcribe({"", "audio/b.wav", {}}, mock).text == "beta");
  CHECK(transcribe({"a", "audio/b.wav", {}}, mock).text == "alpha");
  CHECK(code_of([&] { transcribe({"zzz", "nowhere.wav", {}}, mock); }) == AsrErrc::BackendRejected);
}

TEST_CASE("mock is deterministic") {
  MockTranscriber mock({entry("a", "the same words")});
  for (int i = 0; i < 20; ++i) CHECK(transcribe({"a", "", {}}, mock).text == "the same words");
}

TEST_CASE("http backend with unreachable endpoint") {
  HttpTranscriber http({"http://127.0.0.1:1/v1/audio/transcriptions", "whisper-small", "", std::chrono::milliseconds(500)});
  AudioInput in{"x", "", std::vector<std::int16_t>(320, 0)};
  CHECK(code_of([&] { transcribe(in, http); }) == AsrErrc::BackendUnreachable);
  HttpTranscriber bad_url({"not a url", "m", "", std::chrono::milliseconds(100)});
  CHECK(code_of([&] { transcribe(in, bad_url); }) == AsrErrc::BackendUnreachable);
}

TEST_CASE("manifest parsing") {
  const std::string good = R"([
    {"id":"a","group":"g1","audio_path":"a.wav","reference_text":"x","mock_hypothesis":"x","mock_delay_ms":0},
    {"id":"b","group":"g1","audio_path":"b.wav","reference_text":"y","mock_hypothesis":"","mock_delay_ms":5},
    {"id":"c","group":"g2","audio_path":"c.wav","reference_text":"z","mock_hypothesis":"z","mock_delay_ms":10}
  ])";
  const auto entries = parse_manifest(good);
  REQUIRE(entries.size() == 3);
  CHECK(entries[1].mock_delay_ms == 5);
  CHECK(entries[2].group == "g2");

  SUBCASE("missing reference_text") {
    try {
      parse_manifest(R"([{"id":"a","group":"g","audio_path":"","mock_hypothesis":"","mock_delay_ms":0}])");
      FAIL("accepted");
    } catch (const SchemaViolation& e) {
      CHECK(e.field() == "reference_text");
      CHECK(e.index() == 0);
    }
  }
  SUBCASE("duplicate id") {
    CHECK(code_of([] {
            parse_manifest(R"([
              {"id":"a","group":"g","audio_path":"","reference_text":"","mock_hypothesis":"","mock_delay_ms":0},
              {"id":"a","group":"g","audio_path":"","reference_text":"","mock_hypothesis":"","mock_delay_ms":0}])");
          }) == AsrErrc::DuplicateId);
  }
  SUBCASE("negative delay, unknown key, wrong types") {
    CHECK(code_of([] {
            parse_manifest(R"([{"id":"a","group":"g","audio_path":"","reference_text":"","mock_hypothesis":"","mock_delay_ms":-1}])");
          }) == AsrErrc::SchemaViolation);
    CHECK(code_of([] {
            parse_manifest(R"([{"id":"a","group":"g","audio_path":"","reference_text":"","mock_hypothesis":"","mock_delay_ms":0,"extra":1}])");
          }) == AsrErrc::SchemaViolation);
    CHECK(code_of([] {
            parse_manifest(R"([{"id":1,"group":"g","audio_path":"","reference_text":"","mock_hypothesis":"","mock_delay_ms":0}])");
          }) == AsrErrc::SchemaViolation);
    CHECK(code_of([] { parse_manifest("{}"); }) == AsrErrc::SchemaViolation);
    CHECK(code_of([] { parse_manifest("[1"); }) == AsrErrc::SchemaViolation);
  }
}

TEST_CASE("manifest file loading") {
  testing::TempDir dir;
  testing::write_file(dir / "m.json",
                      R"([{"id":"a","group":"g","audio_path":"","reference_text":"r","mock_hypothesis":"h","mock_delay_ms":0}])");
  CHECK(load_manifest(dir / "m.json").size() == 1);
  CHECK_THROWS_AS(load_manifest(dir / "none.json"), SchemaViolation);
}

TEST_CASE("load_manifest resolves relative audio paths against the manifest directory") {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "sub");
  testing::write_file(dir / "sub/m.json", R"([
    {"id":"a","group":"g","audio_path":"audio/a.wav","reference_text":"r","mock_hypothesis":"h","mock_delay_ms":0},
    {"id":"b","group":"g","audio_path":"/abs/b.wav","reference_text":"r","mock_hypothesis":"h","mock_delay_ms":0},
    {"id":"c","group":"g","audio_path":"","reference_text":"r","mock_hypothesis":"h","mock_delay_ms":0}])");
  const auto m = load_manifest(dir / "sub/m.json");
  CHECK(m[0].audio_path == (dir / "sub/audio/a.wav").string());
  CHECK(m[1].audio_path == "/abs/b.wav");
  CHECK(m[2].audio_path.empty());
}
