#include <doctest.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>

#include "pgpt/asr.hpp"
#include "pgpt/evalkit.hpp"
#include "support.hpp"
#include "wer_oracle.hpp"

namespace ev = pgpt::eval;

namespace {

ev::Tokens words(std::string_view s) { return ev::normalize(s); }

ev::AlignmentCounts from_oracle(const oracle::Counts& c) { return {c.S, c.D, c.I, c.N1}; }

ev::EvalErrc eval_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ev::EvalError& e) {
    return e.code();
  }
  FAIL("expected EvalError");
  return ev::EvalErrc::InvalidInput;
}

ev::Tokens random_tokens(std::mt19937& rng, std::size_t max_len, int alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> sym(0, alphabet - 1);
  ev::Tokens out(len(rng));
  for (auto& t : out) t = std::string(1, static_cast<char>('a' + sym(rng)));
  return out;
}

}  // namespace

TEST_CASE("normalize lowercases, strips punctuation and keeps apostrophes") {
  CHECK(ev::normalize("Hello, WORLD!") == ev::Tokens{"hello", "world"});
  CHECK(ev::normalize("  don't   stop ") == ev::Tokens{"don't", "stop"});
  CHECK(ev::normalize("...").empty());
}

TEST_CASE("align examples") {
  CHECK(ev::align(words("the cat sat on the mat"), words("the cat sat mat")) == ev::AlignmentCounts{0, 2, 0, 6});
  CHECK(ev::align({"a"}, {"b"}) == ev::AlignmentCounts{1, 0, 0, 1});
  CHECK(ev::align({"a", "b"}, {"a", "b", "c"}) == ev::AlignmentCounts{0, 0, 1, 2});
  CHECK(ev::align({}, {}) == ev::AlignmentCounts{0, 0, 0, 0});
  CHECK(ev::align({"a", "b"}, {}) == ev::AlignmentCounts{0, 2, 0, 2});
  CHECK(eval_code([] { ev::align({}, {"x"}); }) == ev::EvalErrc::EmptyReference);
}

TEST_CASE("word error rate spot values") {
  CHECK(ev::word_error_rate("please wave your hand", "please wave").wer == doctest::Approx(0.5));
  CHECK(ev::word_error_rate("turn left now please", "turn right").wer == doctest::Approx(0.75));
  CHECK(ev::word_error_rate("Hello there.", "hello THERE").wer == 0.0);
  CHECK(ev::word_error_rate("yes", "no no").wer == doctest::Approx(2.0));
  CHECK(eval_code([] { ev::word_error_rate("", "anything"); }) == ev::EvalErrc::EmptyReference);
  CHECK(eval_code([] { ev::compute_wer({}); }) == ev::EvalErrc::EmptyReference);
}

TEST_CASE("alignment agrees with the exhaustive and search oracles") {
  std::mt19937 rng(1234);
  for (int k = 0; k < 1500; ++k) {
    const auto ref = random_tokens(rng, 6, 3);
    auto hyp = random_tokens(rng, 6, 3);
    if (ref.empty()) hyp.clear();
    CAPTURE(k);
    const auto got = ev::align(ref, hyp);
    CHECK(got.edits() == oracle::min_edits(ref, hyp));
    CHECK(got == from_oracle(oracle::tie_break_alignment(ref, hyp)));
    CHECK(got == from_oracle(oracle::exhaustive_alignment(ref, hyp)));
  }
}

TEST_CASE("alignment agrees with the search oracle on longer inputs") {
  std::mt19937 rng(99);
  for (int k = 0; k < 2000; ++k) {
    const auto ref = random_tokens(rng, 12, 5);
    auto hyp = random_tokens(rng, 12, 5);
    if (ref.empty()) hyp.clear();
    CAPTURE(k);
    const auto got = ev::align(ref, hyp);
    REQUIRE(got == from_oracle(oracle::tie_break_alignment(ref, hyp)));
    CHECK(got.N1 == ref.size());
    // Every hypothesis word is a match, substitution or insertion.
    CHECK(got.N1 - got.D + got.I == hyp.size());
  }
}

TEST_CASE("alignment properties") {
  std::mt19937 rng(7);
  for (int k = 0; k < 1000; ++k) {
    auto ref = random_tokens(rng, 10, 4);
    auto hyp = random_tokens(rng, 10, 4);
    if (ref.empty()) ref.push_back("a");
    if (hyp.empty()) hyp.push_back("b");
    CAPTURE(k);

    // Swapping the roles mirrors deletions and insertions.
    const auto fwd = ev::align(ref, hyp);
    const auto back = ev::align(hyp, ref);
    CHECK(back.S == fwd.S);
    CHECK(back.D == fwd.I);
    CHECK(back.I == fwd.D);

    // Identical inputs have zero error, and only identical inputs do.
    CHECK(ev::align(ref, ref).edits() == 0);
    CHECK((fwd.edits() == 0) == (ref == hyp));

    // Appending words to the hypothesis costs exactly that many insertions.
    auto longer = ref;
    longer.insert(longer.end(), hyp.begin(), hyp.end());
    const auto ins = ev::align(ref, longer);
    CHECK(ins == ev::AlignmentCounts{0, 0, hyp.size(), ref.size()});

    // Edit count is bounded by the longer side.
    CHECK(fwd.edits() <= std::max(ref.size(), hyp.size()));
  }
}

TEST_CASE("paired corpus wer sums counts and skips empty pairs") {
  const auto c = ev::paired_wer({"a b c d", "", "e f"}, {"a b x d", "", "e"});
  CHECK(c.utterances == 2);
  CHECK(c.totals == ev::AlignmentCounts{1, 1, 0, 6});
  CHECK(c.wer == doctest::Approx(2.0 / 6.0));
  CHECK(eval_code([] { ev::paired_wer({"a"}, {"a", "b"}); }) == ev::EvalErrc::InvalidInput);
  CHECK(eval_code([] { ev::paired_wer({"a", ""}, {"a", "b"}); }) == ev::EvalErrc::EmptyReference);
  CHECK(eval_code([] { ev::paired_wer({""}, {""}); }) == ev::EvalErrc::EmptyReference);
}

TEST_CASE("format_fixed4 rounds to four places") {
  CHECK(ev::format_fixed4(0.01716) == "0.0172");
  CHECK(ev::format_fixed4(0.0) == "0.0000");
  CHECK(ev::format_fixed4(2.0) == "2.0000");
  CHECK(ev::format_fixed4(123.45678) == "123.4568");
}

TEST_CASE("report format names") {
  CHECK(ev::report_format_from_string("csv") == ev::ReportFormat::Csv);
  CHECK(ev::report_format_from_string("structured-text") == ev::ReportFormat::StructuredText);
  CHECK_FALSE(ev::report_format_from_string("xml").has_value());
}

TEST_CASE("bench over the golden manifest") {
  const auto manifest = pgpt::asr::load_manifest(testing::test_data("bench_manifest.json"));
  pgpt::asr::MockTranscriber mock(manifest);
  const auto report = ev::bench_run(manifest, mock);

  REQUIRE(report.entries.size() == 4);
  CHECK(report.failed == 0);
  CHECK(report.entries[0].id == "b1");
  CHECK(report.entries[1].wer->counts == ev::AlignmentCounts{0, 1, 0, 5});
  CHECK(report.entries[2].wer->counts == ev::AlignmentCounts{1, 0, 1, 5});
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(report.entries[k].recognition_time_ms >= static_cast<double>(manifest[k].mock_delay_ms));
  }

  const auto csv = ev::render_report(report, ev::ReportFormat::Csv);
  std::string why;
  CHECK_MESSAGE(testing::bench_csv_matches(csv, testing::read_file(testing::test_data("bench_golden.csv")), 50.0, &why),
                why);

  const auto doc = nlohmann::json::parse(ev::render_report(report, ev::ReportFormat::StructuredText));
  CHECK(doc["tool"] == "pgpt");
  CHECK(doc["failed"] == 0);
  REQUIRE(doc["rows"].size() == 2);
  CHECK(doc["rows"][0]["group"] == "noisy");
  CHECK(doc["rows"][0]["mean_wer"] == "0.4500");
  CHECK(doc["rows"][1]["group"] == "quiet");
}

TEST_CASE("bench records failures as NA and excludes them from means") {
  std::vector<pgpt::asr::MockManifestEntry> manifest = {
      {"ok", "g", "", "hello there", "hello there", 0},
      {"empty", "g", "", "hello there", "", 0},
      {"lonely", "h", "", "hi", "", 0},
  };
  pgpt::asr::MockTranscriber mock(manifest);
  const auto report = ev::bench_run(manifest, mock);
  CHECK(report.failed == 2);
  CHECK_FALSE(report.entries[1].wer.has_value());
  CHECK(report.entries[1].error.find("EmptyTranscription") != std::string::npos);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].n_utterances == 1);
  CHECK(report.rows[0].mean_wer == 0.0);
  CHECK(report.rows[1].n_utterances == 0);

  const auto csv = ev::render_report(report, ev::ReportFormat::Csv);
  CHECK(csv.find("; failed: 2\n") != std::string::npos);
  CHECK(csv.find("\nh,mock,0,NA,NA\n") != std::string::npos);
  const auto doc = nlohmann::json::parse(ev::render_report(report, ev::ReportFormat::StructuredText));
  CHECK(doc["rows"][1]["mean_wer"].is_null());
}

TEST_CASE("csv quotes fields that need it") {
  ev::BenchReport report;
  report.rows.push_back({"a,b", "say \"hi\"", 1, 0.5, 10.0});
  const auto csv = ev::render_report(report, ev::ReportFormat::Csv);
  CHECK(csv.find("\n\"a,b\",\"say \"\"hi\"\"\",1,0.5000,10.0000\n") != std::string::npos);
}

TEST_CASE("empty reports and unwritable paths are errors") {
  ev::BenchReport empty;
  CHECK(eval_code([&] { ev::render_report(empty, ev::ReportFormat::Csv); }) == ev::EvalErrc::EmptyReport);

  ev::BenchReport one;
  one.rows.push_back({"g", "mock", 1, 0.0, 1.0});
  testing::TempDir dir;
  CHECK(eval_code([&] { ev::emit_report(one, ev::ReportFormat::Csv, dir / "missing/sub/out.csv"); }) ==
        ev::EvalErrc::IoFailure);
  ev::emit_report(one, ev::ReportFormat::Csv, dir / "out.csv");
  CHECK(testing::read_file(dir / "out.csv") == ev::render_report(one, ev::ReportFormat::Csv));
}
