// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0
//
// The commands behind the CLI. Each takes a RunConfig and returns the main
// document as a string; side outputs (HTML maps, manifests, trace
// directories) are written to the paths named in the config.

#ifndef METRIC_LENS_PIPELINE_HPP_
#define METRIC_LENS_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "attribution.hpp"
#include "corruption.hpp"
#include "encoder.hpp"
#include "evaluation.hpp"
#include "io.hpp"

namespace mlens {

struct ModelSpec {
  EncoderConfig encoder;
  Architecture architecture = Architecture::joint;
};

// JSON object with keys architecture, layers, heads, d_model, d_ff,
// vocab_size, seed. Missing keys keep their defaults.
ModelSpec parse_model_config(std::string_view json_text);
ModelSpec load_model_config(const std::filesystem::path& path);

struct RunConfig {
  std::vector<std::filesystem::path> inputs;  // MQM-style TSV files
  MqmOptions mqm;

  // Exactly one trace source.
  std::optional<ModelSpec> model;
  std::optional<std::filesystem::path> traces;

  std::vector<Method> methods{Method::embed_align, Method::grad_l2, Method::attention,
                              Method::attn_x_grad};
  std::vector<InputConfig> input_configs{InputConfig::src, InputConfig::ref,
                                         InputConfig::src_ref};
  std::optional<std::filesystem::path> heads_file;
  std::size_t top_k = 5;
  std::optional<std::uint64_t> seed;  // overrides the model seed; seeds corruption
  AttentionReduction reduction = AttentionReduction::received;

  // evaluate
  ReportFormat format = ReportFormat::json;
  Grouping grouping;
  Averaging averaging = Averaging::macro;
  bool include_oracle = false;

  // explain
  std::optional<std::filesystem::path> html_dir;

  // corrupt
  std::vector<CorruptionCategory> categories{CorruptionCategory::neg, CorruptionCategory::hall,
                                             CorruptionCategory::ne, CorruptionCategory::num};
  std::optional<std::size_t> per_category;
  std::optional<std::filesystem::path> lexicon;
  std::optional<std::filesystem::path> donors;
  std::optional<std::filesystem::path> manifest_out;

  // export-traces
  std::optional<std::filesystem::path> out_dir;

  std::size_t threads = 0;  // 0 = METRIC_LENS_THREADS or hardware concurrency
};

std::vector<EvaluationInstance> load_instances(const RunConfig& config);

// JSON with per-instance, per-config, per-method subword and word scores.
std::string cmd_explain(const RunConfig& config);
// Rendered EvalReport document. Throws ErrorCode::no_evaluable when no
// sentence yields a defined metric.
std::string cmd_evaluate(const RunConfig& config);
// Head-ranking JSON for every requested attention method and input config.
std::string cmd_select_heads(const RunConfig& config);
// Corrupted corpus as MQM TSV; the manifest goes to `manifest_out` if set.
std::string cmd_corrupt(const RunConfig& config);
std::string corruption_manifest_json(const CorruptionManifest& manifest);
// Writes one trace directory per (instance, config) plus index.json under
// `out_dir`; returns the index document.
std::string cmd_export_traces(const RunConfig& config);

struct ValidationOutcome {
  std::string document;
  std::size_t violations = 0;
};
// Checks every indexed trace against its instance.
ValidationOutcome cmd_validate(const RunConfig& config);

// Word-level category of a sentence: "none" without spans, the shared span
// category, or "mixed".
std::string sentence_category(const EvaluationInstance& instance);

// Runs fn(0..n-1) on up to `threads` workers. The exception of the lowest
// failing index is rethrown.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);
std::size_t resolve_threads(std::size_t requested);

}  // namespace mlens

#endif  // METRIC_LENS_PIPELINE_HPP_
