#include "pgpt/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <utility>

#include <nlohmann/json.hpp>

#include "pgpt/text.hpp"

namespace pgpt::eval {

std::string_view errc_name(EvalErrc code) noexcept {
  switch (code) {
    case EvalErrc::EmptyReference: return "EmptyReference";
    case EvalErrc::EmptyReport: return "EmptyReport";
    case EvalErrc::IoFailure: return "IoFailure";
    case EvalErrc::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

Tokens normalize(std::string_view text) { return text::tokenize_words(text); }

namespace {

// (edits, insertions + deletions), compared lexicographically.
using Cost = std::pair<std::size_t, std::size_t>;

Cost plus(Cost c, std::size_t edits, std::size_t indels) { return {c.first + edits, c.second + indels}; }

}  // namespace

AlignmentCounts align(const Tokens& ref, const Tokens& hyp) {
  if (ref.empty() && !hyp.empty()) {
    throw EvalError(EvalErrc::EmptyReference, "reference is empty but hypothesis has " + std::to_string(hyp.size()) +
                                                  " words; WER is undefined");
  }
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  const std::size_t w = m + 1;
  std::vector<Cost> cost((n + 1) * w);
  auto at = [&](std::size_t i, std::size_t j) -> Cost& { return cost[i * w + j]; };

  for (std::size_t i = 1; i <= n; ++i) at(i, 0) = {i, i};
  for (std::size_t j = 1; j <= m; ++j) at(0, j) = {j, j};
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const bool same = ref[i - 1] == hyp[j - 1];
      Cost best = plus(at(i - 1, j - 1), same ? 0 : 1, 0);
      best = std::min(best, plus(at(i - 1, j), 1, 1));
      best = std::min(best, plus(at(i, j - 1), 1, 1));
      at(i, j) = best;
    }
  }

  AlignmentCounts counts;
  counts.N1 = n;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    const Cost here = at(i, j);
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (same && at(i - 1, j - 1) == here) {
        --i, --j;
        continue;
      }
      if (!same && plus(at(i - 1, j - 1), 1, 0) == here) {
        ++counts.S;
        --i, --j;
        continue;
      }
    }
    if (i > 0 && plus(at(i - 1, j), 1, 1) == here) {
      ++counts.D;
      --i;
      continue;
    }
    ++counts.I;
    --j;
  }
  return counts;
}

WerResult compute_wer(const AlignmentCounts& counts) {
  if (counts.N1 == 0) throw EvalError(EvalErrc::EmptyReference, "N1 = 0; WER is undefined");
  return {counts, static_cast<double>(counts.edits()) / static_cast<double>(counts.N1)};
}

WerResult word_error_rate(std::string_view reference, std::string_view hypothesis) {
  return compute_wer(align(normalize(reference), normalize(hypothesis)));
}

CorpusWer paired_wer(const std::vector<std::string>& references, const std::vector<std::string>& hypotheses) {
  if (references.size() != hypotheses.size()) {
    throw EvalError(EvalErrc::InvalidInput, "reference has " + std::to_string(references.size()) +
                                                " lines but hypothesis has " + std::to_string(hypotheses.size()));
  }
  CorpusWer out;
  for (std::size_t k = 0; k < references.size(); ++k) {
    const auto ref = normalize(references[k]);
    const auto hyp = normalize(hypotheses[k]);
    if (ref.empty() && hyp.empty()) continue;
    AlignmentCounts c;
    try {
      c = align(ref, hyp);
    } catch (const EvalError& e) {
      throw EvalError(e.code(), "line " + std::to_string(k + 1) + ": " + e.what());
    }
    out.totals.S += c.S;
    out.totals.D += c.D;
    out.totals.I += c.I;
    out.totals.N1 += c.N1;
    ++out.utterances;
  }
  out.wer = compute_wer(out.totals).wer;
  return out;
}

BenchReport bench_run(const std::vector<asr::MockManifestEntry>& manifest, asr::Transcriber& backend,
                      const BenchOptions& options) {
  BenchReport report;
  const std::string backend_id = backend.id();

  for (const auto& entry : manifest) {
    BenchEntryResult r;
    r.id = entry.id;
    r.group = entry.group;
    r.backend = backend_id;

    asr::AudioInput input{entry.id, entry.audio_path, {}};
    try {
      if (options.gate && !entry.audio_path.empty() && std::filesystem::exists(entry.audio_path)) {
        for (auto& seg : gate::segment_wav_file(entry.audio_path, *options.gate)) {
          input.samples.insert(input.samples.end(), seg.samples.begin(), seg.samples.end());
        }
      }
      const auto t = asr::transcribe(input, backend);
      r.hypothesis = t.text;
      r.recognition_time_ms = t.recognition_time_ms;
      r.wer = word_error_rate(entry.reference_text, t.text);
    } catch (const asr::AsrError& e) {
      r.recognition_time_ms = e.elapsed_ms();
      r.error = std::string(asr::errc_name(e.code())) + ": " + e.what();
    } catch (const Error& e) {
      r.error = e.what();
    }
    if (!r.wer) ++report.failed;
    report.entries.push_back(std::move(r));
  }

  struct Acc {
    std::size_t n = 0;
    double wer = 0.0;
    double time = 0.0;
  };
  std::map<std::pair<std::string, std::string>, Acc> groups;
  for (const auto& r : report.entries) {
    auto& acc = groups[{r.group, r.backend}];
    if (!r.wer) continue;
    ++acc.n;
    acc.wer += r.wer->wer;
    acc.time += r.recognition_time_ms;
  }
  for (const auto& [key, acc] : groups) {
    BenchRow row{key.first, key.second, acc.n, 0.0, 0.0};
    if (acc.n > 0) {
      row.mean_wer = acc.wer / static_cast<double>(acc.n);
      row.mean_recognition_time_ms = acc.time / static_cast<double>(acc.n);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::optional<ReportFormat> report_format_from_string(std::string_view name) noexcept {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "structured-text") return ReportFormat::StructuredText;
  return std::nullopt;
}

std::string format_fixed4(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<BenchRow> sorted_rows(const BenchReport& report) {
  auto rows = report.rows;
  std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    return std::tie(a.group, a.backend) < std::tie(b.group, b.backend);
  });
  return rows;
}

}  // namespace

std::string render_report(const BenchReport& report, ReportFormat format) {
  if (report.rows.empty()) throw EvalError(EvalErrc::EmptyReport, "benchmark report has no rows");
  const auto rows = sorted_rows(report);

  if (format == ReportFormat::Csv) {
    std::string out = "# pgpt " PGPT_VERSION "; normalization: " + std::string(text::kNormalizationPolicy) +
                      "; failed: " + std::to_string(report.failed) + "\n";
    out += kReportColumns;
    out += '\n';
    for (const auto& r : rows) {
      const bool na = r.n_utterances == 0;
      out += csv_field(r.group) + "," + csv_field(r.backend) + "," + std::to_string(r.n_utterances) + "," +
             (na ? "NA" : format_fixed4(r.mean_wer)) + "," + (na ? "NA" : format_fixed4(r.mean_recognition_time_ms)) +
             "\n";
    }
    return out;
  }

  nlohmann::ordered_json doc;
  doc["tool"] = "pgpt";
  doc["version"] = PGPT_VERSION;
  doc["normalization"] = text::kNormalizationPolicy;
  doc["failed"] = report.failed;
  doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["group"] = r.group;
    row["backend"] = r.backend;
    row["n_utterances"] = r.n_utterances;
    if (r.n_utterances == 0) {
      row["mean_wer"] = nullptr;
      row["mean_recognition_time_ms"] = nullptr;
    } else {
      // Numbers are emitted as fixed-point strings so they match the CSV.
      row["mean_wer"] = format_fixed4(r.mean_wer);
      row["mean_recognition_time_ms"] = format_fixed4(r.mean_recognition_time_ms);
    }
    doc["rows"].push_back(std::move(row));
  }
  return doc.dump(2) + "\n";
}

void emit_report(const BenchReport& report, ReportFormat format, const std::filesystem::path& path) {
  const auto body = render_report(report, format);
  std::ofstream out(path, std::ios::out | std::ios::trunc | std::ios::binary);
  if (!out) throw EvalError(EvalErrc::IoFailure, "cannot open " + path.string() + " for writing");
  out << body;
  out.flush();
  if (!out) throw EvalError(EvalErrc::IoFailure, "write to " + path.string() + " failed");
}

}  // namespace pgpt::eval
