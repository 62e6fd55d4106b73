// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0
//
// metric-lens: explain, evaluate and stress-test MT metric attributions.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metric_lens/metric_lens.h"

namespace {

struct Flags {
  std::vector<std::string> inputs;
  std::string model_config, traces, methods, input_configs, heads_file, reduction;
  std::size_t top_k = 5;
  std::optional<std::uint64_t> seed;
  std::string out, format = "json", group_by, html_dir;
  bool micro = false, include_oracle = false, per_rater = false;
  std::string lang_pair;
  std::string categories, lexicon, donors, manifest;
  std::size_t per_category = 0;
  std::size_t threads = 0;
};

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int write_output(const std::string& path, const char* document) {
  if (path.empty() || path == "-") {
    std::fputs(document, stdout);
    return 0;
  }
  std::ofstream out(path, std::ios::binary);
  out << document;
  if (!out) {
    std::fprintf(stderr, "metric-lens: IoError: cannot write %s\n", path.c_str());
    return 2;
  }
  return 0;
}

void add_source_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("tsv", f.inputs, "MQM-style TSV files")->required();
  cmd->add_option("--model-config", f.model_config, "toy model config (JSON)");
  cmd->add_option("--traces", f.traces, "trace directory with index.json");
  cmd->add_option("--methods", f.methods,
                  "comma list of embed-align, grad-l2, attention, attn-grad");
  cmd->add_option("--inputs", f.input_configs, "comma list of src, ref, src+ref");
  cmd->add_option("--seed", f.seed, "overrides the model seed");
  cmd->add_flag("--per-rater", f.per_rater, "keep raters separate instead of merging spans");
  cmd->add_option("--lang-pair", f.lang_pair, "language pair for TSVs without one");
  cmd->add_option("--attention-reduction", f.reduction, "received (default) or emitted");
  cmd->add_option("--out", f.out, "output file (default stdout)");
}

void add_head_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--heads-file", f.heads_file, "head ranking from select-heads");
  cmd->add_option("--top-k", f.top_k, "heads to ensemble")->default_val(5);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metric-lens: token-level explanations for MT evaluation metrics"};
  app.set_version_flag("--version", std::string(mlens_version()));
  app.require_subcommand(1);
  Flags f;

  auto* explain = app.add_subcommand("explain", "score tokens of each instance");
  add_source_flags(explain, f);
  add_head_flags(explain, f);
  explain->add_option("--html-dir", f.html_dir, "write one saliency page per explanation");

  auto* evaluate = app.add_subcommand("evaluate", "AUC and Recall@K against gold spans");
  add_source_flags(evaluate, f);
  add_head_flags(evaluate, f);
  evaluate->add_option("--format", f.format, "json, tsv or markdown")->default_val("json");
  evaluate->add_option("--group-by", f.group_by,
                       "comma list of lang_pair, method, input_config, category");
  evaluate->add_flag("--micro", f.micro, "pool words instead of averaging sentences");
  evaluate->add_flag("--include-oracle", f.include_oracle, "add a scores := labels control row");

  auto* select = app.add_subcommand("select-heads", "rank attention heads on dev data");
  add_source_flags(select, f);
  select->add_option("--top-k", f.top_k, "heads to select")->default_val(5);

  auto* corrupt = app.add_subcommand("corrupt", "inject critical errors into a clean corpus");
  corrupt->add_option("tsv", f.inputs, "MQM-style TSV files")->required();
  corrupt->add_option("--categories", f.categories, "comma list of NEG, HALL, NE, NUM");
  corrupt->add_option("--per-category", f.per_category, "target count per category");
  corrupt->add_option("--lexicon", f.lexicon, "entity lexicon (type<TAB>surface)");
  corrupt->add_option("--donors", f.donors, "donor sentences, one per line");
  corrupt->add_option("--seed", f.seed, "corruption seed");
  corrupt->add_option("--out", f.out, "corrupted TSV (default stdout)");
  corrupt->add_option("--manifest", f.manifest, "manifest JSON (default <out>.manifest.json)");
  corrupt->add_option("--lang-pair", f.lang_pair, "language pair for TSVs without one");

  auto* exporter = app.add_subcommand("export-traces", "write toy-model traces to disk");
  exporter->add_option("tsv", f.inputs, "MQM-style TSV files")->required();
  exporter->add_option("--model-config", f.model_config, "toy model config (JSON)")->required();
  exporter->add_option("--inputs", f.input_configs, "comma list of src, ref, src+ref");
  exporter->add_option("--seed", f.seed, "overrides the model seed");
  exporter->add_option("--out", f.out, "output directory")->required();
  exporter->add_option("--lang-pair", f.lang_pair, "language pair for TSVs without one");

  auto* validate = app.add_subcommand("validate", "check trace directories against a corpus");
  validate->add_option("tsv", f.inputs, "MQM-style TSV files")->required();
  validate->add_option("--traces", f.traces, "trace directory with index.json")->required();
  validate->add_option("--out", f.out, "report file (default stdout)");
  validate->add_option("--lang-pair", f.lang_pair, "language pair for TSVs without one");

  for (auto* cmd : {explain, evaluate, select, corrupt, exporter, validate})
    cmd->add_option("--threads", f.threads, "worker cap (overrides METRIC_LENS_THREADS)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::vector<const char*> inputs;
  for (const auto& s : f.inputs) inputs.push_back(s.c_str());
  mlens_run_options o;
  mlens_run_options_init(&o);
  o.inputs = inputs.data();
  o.n_inputs = inputs.size();
  o.per_rater = f.per_rater;
  o.lang_pair = opt(f.lang_pair);
  o.model_config = opt(f.model_config);
  o.traces = opt(f.traces);
  o.methods = opt(f.methods);
  o.input_configs = opt(f.input_configs);
  o.heads_file = opt(f.heads_file);
  o.top_k = f.top_k;
  o.has_seed = f.seed.has_value();
  o.seed = f.seed.value_or(0);
  o.reduction = opt(f.reduction);
  o.format = opt(f.format);
  o.group_by = opt(f.group_by);
  o.micro = f.micro;
  o.include_oracle = f.include_oracle;
  o.html_dir = opt(f.html_dir);
  o.categories = opt(f.categories);
  o.per_category = f.per_category;
  o.lexicon = opt(f.lexicon);
  o.donors = opt(f.donors);
  o.threads = f.threads;

  std::string manifest = f.manifest;
  if (corrupt->parsed() && manifest.empty() && !f.out.empty() && f.out != "-")
    manifest = f.out + ".manifest.json";
  o.manifest_out = opt(manifest);

  char* doc = nullptr;
  mlens_status status = MLENS_OK;
  std::size_t violations = 0;
  std::string out_path = f.out;
  if (explain->parsed()) {
    status = mlens_cmd_explain(&o, &doc);
  } else if (evaluate->parsed()) {
    status = mlens_cmd_evaluate(&o, &doc);
  } else if (select->parsed()) {
    status = mlens_cmd_select_heads(&o, &doc);
  } else if (corrupt->parsed()) {
    status = mlens_cmd_corrupt(&o, &doc);
  } else if (exporter->parsed()) {
    o.out_dir = f.out.c_str();
    status = mlens_cmd_export_traces(&o, &doc);
    out_path.clear();
  } else if (validate->parsed()) {
    status = mlens_cmd_validate(&o, &doc, &violations);
  }

  if (status != MLENS_OK) {
    std::fprintf(stderr, "metric-lens: %s\n", mlens_last_error());
    return mlens_exit_code(status);
  }
  int rc = 0;
  if (exporter->parsed()) {
    std::fprintf(stderr, "metric-lens: traces written to %s\n", f.out.c_str());
  } else {
    rc = write_output(out_path, doc);
  }
  mlens_string_free(doc);
  if (rc == 0 && violations > 0) {
    std::fprintf(stderr, "metric-lens: %zu trace violation(s)\n", violations);
    rc = 2;
  }
  return rc;
}
