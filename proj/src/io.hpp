// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0
//
// File formats: MQM-style TSV (spans as inline <v>...</v> markers), trace
// directories (JSON manifest + raw little-endian float32 tensors), evaluation
// reports and HTML saliency maps.

#ifndef METRIC_LENS_IO_HPP_
#define METRIC_LENS_IO_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "attribution.hpp"
#include "core.hpp"
#include "evaluation.hpp"

namespace mlens {

// --- MQM TSV ---------------------------------------------------------------

struct MqmOptions {
  bool per_rater = false;  // default merges raters by span union
  std::string default_lang_pair = "unknown";
};

struct MarkedText {
  std::string text;  // markers stripped
  std::vector<std::pair<std::size_t, std::size_t>> spans;
};

// Strips <v>...</v> markers. Throws ErrorCode::parse on unbalanced or nested
// markers (the line number is attached by the caller).
MarkedText strip_span_markers(std::string_view marked);

// Required header columns: system, seg_id, rater, severity, category, source,
// target. Optional: doc, lang_pair (or lp), reference. Rows of one segment
// (system, doc, seg_id[, rater]) become one instance.
std::vector<EvaluationInstance> parse_mqm_tsv(const std::filesystem::path& path,
                                              const MqmOptions& options = {});
std::vector<EvaluationInstance> parse_mqm_tsv_string(std::string_view content,
                                                     const MqmOptions& options = {},
                                                     const std::string& source_name = "<tsv>");

// Writes instances in the same convention: one row per gold span (a
// "No-error" row for span-free instances).
std::string format_mqm_tsv(std::span<const EvaluationInstance> instances);

// --- traces ----------------------------------------------------------------

inline constexpr int kTraceFormatVersion = 1;

void write_trace(const ModelTrace& trace, const std::filesystem::path& dir);
// Throws ErrorCode::trace_format on a malformed manifest or a tensor file
// whose size disagrees with its declared shape. Unknown descriptors are
// ignored.
ModelTrace read_trace(const std::filesystem::path& dir);

struct TraceIndexEntry {
  std::string instance_id;
  InputConfig input_config = InputConfig::ref;
  std::string path;  // relative to the index directory
};

void write_trace_index(std::span<const TraceIndexEntry> entries,
                       const std::filesystem::path& dir);
std::vector<TraceIndexEntry> read_trace_index(const std::filesystem::path& dir);

// --- head rankings ---------------------------------------------------------

struct RankingRecord {
  Method method = Method::attention;
  InputConfig input_config = InputConfig::ref;
  HeadRanking ranking;
};

std::string format_head_rankings(std::span<const RankingRecord> records);
std::vector<RankingRecord> parse_head_rankings(std::string_view json_text);

// --- reports ---------------------------------------------------------------

enum class ReportFormat { json, tsv, markdown };
ReportFormat parse_report_format(std::string_view name);

// Rows are ordered by (lang_pair, method, input_config, category) with the
// "Avg." rows last; the markdown form is a method x language-pair grid.
std::string render_report(std::span<const EvalReport> reports, ReportFormat format);

// Self-contained page: MT subwords tinted by min-max-normalized score, words
// inside gold spans underlaid in gray.
std::string render_saliency_html(const EvaluationInstance& instance,
                                 const Explanation& explanation);

// --- misc ------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace mlens

#endif  // METRIC_LENS_IO_HPP_
