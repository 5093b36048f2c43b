#pragma once

// ASR evaluation: word error rate over a minimal edit alignment, and
// per-group benchmark runs with CSV or JSON reports.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pgpt/asr.hpp"
#include "pgpt/audio_gate.hpp"
#include "pgpt/error.hpp"

namespace pgpt::eval {

enum class EvalErrc { EmptyReference, EmptyReport, IoFailure, InvalidInput };

std::string_view errc_name(EvalErrc code) noexcept;

class EvalError : public CodedError<EvalErrc> {
 public:
  using CodedError::CodedError;
};

struct AlignmentCounts {
  std::size_t S = 0;
  std::size_t D = 0;
  std::size_t I = 0;
  std::size_t N1 = 0;

  std::size_t edits() const noexcept { return S + D + I; }
  bool operator==(const AlignmentCounts&) const = default;
};

struct WerResult {
  AlignmentCounts counts;
  double wer = 0.0;
};

using Tokens = std::vector<std::string>;

// Same policy as text::tokenize_words.
Tokens normalize(std::string_view text);

// Minimal unit-cost alignment of hyp against ref. Among alignments with the
// fewest edits, the one with the fewest insertions+deletions is chosen, and
// the backtrace from the end prefers match, then substitution, then
// deletion, then insertion. This makes align(hyp, ref) the mirror of
// align(ref, hyp): D and I swap, S is preserved.
// Throws EvalError(EmptyReference) when ref is empty and hyp is not.
AlignmentCounts align(const Tokens& ref, const Tokens& hyp);

// (S + D + I) / N1. Throws EvalError(EmptyReference) when N1 == 0.
WerResult compute_wer(const AlignmentCounts& counts);

// normalize + align + compute_wer.
WerResult word_error_rate(std::string_view reference, std::string_view hypothesis);

// Corpus WER over paired lines: counts are summed, then divided once.
// Pairs where both sides normalize to nothing are skipped.
struct CorpusWer {
  AlignmentCounts totals;
  double wer = 0.0;
  std::size_t utterances = 0;
};

CorpusWer paired_wer(const std::vector<std::string>& references, const std::vector<std::string>& hypotheses);

struct BenchEntryResult {
  std::string id;
  std::string group;
  std::string backend;
  std::string hypothesis;
  std::optional<WerResult> wer;  // nullopt: NA, transcription failed
  double recognition_time_ms = 0.0;
  std::string error;
};

struct BenchRow {
  std::string group;
  std::string backend;
  std::size_t n_utterances = 0;
  double mean_wer = 0.0;
  double mean_recognition_time_ms = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;  // sorted by (group, backend)
  std::vector<BenchEntryResult> entries;  // manifest order
  std::size_t failed = 0;
};

struct BenchOptions {
  // When set, entries whose audio file exists are gated first and the
  // concatenated voiced segments are sent to the backend.
  std::optional<gate::GateConfig> gate;
};

// Failed entries (backend error or empty transcript) are recorded with
// wer = nullopt, excluded from both means, and counted in `failed`.
BenchReport bench_run(const std::vector<asr::MockManifestEntry>& manifest, asr::Transcriber& backend,
                      const BenchOptions& options = {});

enum class ReportFormat { Csv, StructuredText };

std::optional<ReportFormat> report_format_from_string(std::string_view name) noexcept;

inline constexpr std::string_view kReportColumns = "group,backend,n_utterances,mean_wer,mean_recognition_time_ms";

// Four decimal places, rounded from the exact binary value.
std::string format_fixed4(double value);

// CSV: one '#' header line (tool version, normalization policy, failed
// count), the column line, then one line per row. StructuredText: a JSON
// object carrying the same header fields and a "rows" array.
// Throws EvalError(EmptyReport) when there are no rows.
std::string render_report(const BenchReport& report, ReportFormat format);

// Throws EvalError(EmptyReport | IoFailure).
void emit_report(const BenchReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace pgpt::eval
