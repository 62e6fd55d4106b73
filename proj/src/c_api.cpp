// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#include "metric_lens/metric_lens.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "pipeline.hpp"

struct mlens_corpus {
  std::vector<mlens::EvaluationInstance> instances;
};

struct mlens_model {
  mlens::MetricModel model;
};

struct mlens_trace {
  mlens::ModelTrace trace;
};

namespace {

thread_local std::string g_last_error;

mlens_status status_of(mlens::ErrorCode code) {
  using mlens::ErrorCode;
  switch (code) {
    case ErrorCode::config: return MLENS_ERR_CONFIG;
    case ErrorCode::empty_input: return MLENS_ERR_EMPTY_INPUT;
    case ErrorCode::parse: return MLENS_ERR_PARSE;
    case ErrorCode::schema: return MLENS_ERR_SCHEMA;
    case ErrorCode::span: return MLENS_ERR_SPAN;
    case ErrorCode::missing_segment: return MLENS_ERR_MISSING_SEGMENT;
    case ErrorCode::shape: return MLENS_ERR_SHAPE;
    case ErrorCode::trace_format: return MLENS_ERR_TRACE_FORMAT;
    case ErrorCode::no_corruption_site: return MLENS_ERR_NO_CORRUPTION_SITE;
    case ErrorCode::insufficient_donor: return MLENS_ERR_INSUFFICIENT_DONOR;
    case ErrorCode::insufficient_dev_data: return MLENS_ERR_INSUFFICIENT_DEV_DATA;
    case ErrorCode::no_evaluable: return MLENS_ERR_NO_EVALUABLE;
    case ErrorCode::io: return MLENS_ERR_IO;
    case ErrorCode::internal: return MLENS_ERR_INTERNAL;
  }
  return MLENS_ERR_INTERNAL;
}

mlens_status fail(mlens_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename Fn>
mlens_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return MLENS_OK;
  } catch (const mlens::Error& e) {
    return fail(status_of(e.code()), std::string(mlens::error_code_name(e.code())) + ": " + e.what());
  } catch (const std::bad_alloc&) {
    return fail(MLENS_ERR_INTERNAL, "InternalError: out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(MLENS_ERR_IO, std::string("IoError: ") + e.what());
  } catch (const std::exception& e) {
    return fail(MLENS_ERR_INTERNAL, std::string("InternalError: ") + e.what());
  } catch (...) {
    return fail(MLENS_ERR_INTERNAL, "InternalError: unknown exception");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw mlens::Error(mlens::ErrorCode::config, what);
}

std::vector<std::string> split_list(std::string_view list) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    std::string item(list.substr(start, comma - start));
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    start = comma + 1;
  }
  return out;
}

mlens::RunConfig to_run_config(const mlens_run_options* o) {
  mlens::RunConfig c;
  for (std::size_t i = 0; i < o->n_inputs; ++i) {
    require(o->inputs && o->inputs[i], "null input path");
    c.inputs.emplace_back(o->inputs[i]);
  }
  c.mqm.per_rater = o->per_rater != 0;
  if (o->lang_pair) c.mqm.default_lang_pair = o->lang_pair;
  if (o->model_config) c.model = mlens::load_model_config(o->model_config);
  if (o->traces) c.traces = o->traces;
  if (o->methods) {
    c.methods.clear();
    for (const auto& m : split_list(o->methods)) c.methods.push_back(mlens::parse_method(m));
    require(!c.methods.empty(), "--methods is empty");
  }
  if (o->input_configs) {
    c.input_configs.clear();
    for (const auto& m : split_list(o->input_configs))
      c.input_configs.push_back(mlens::parse_input_config(m));
    require(!c.input_configs.empty(), "--inputs is empty");
  }
  if (o->heads_file) c.heads_file = o->heads_file;
  c.top_k = o->top_k;
  if (o->has_seed) c.seed = o->seed;
  if (o->reduction) {
    const std::string r = o->reduction;
    if (r == "received") c.reduction = mlens::AttentionReduction::received;
    else if (r == "emitted") c.reduction = mlens::AttentionReduction::emitted;
    else throw mlens::Error(mlens::ErrorCode::config, "unknown attention reduction '" + r + "'");
  }
  if (o->format) c.format = mlens::parse_report_format(o->format);
  if (o->group_by) c.grouping = mlens::parse_grouping(o->group_by);
  c.averaging = o->micro ? mlens::Averaging::micro : mlens::Averaging::macro;
  c.include_oracle = o->include_oracle != 0;
  if (o->html_dir) c.html_dir = o->html_dir;
  if (o->categories) {
    c.categories.clear();
    for (const auto& m : split_list(o->categories))
      c.categories.push_back(mlens::parse_corruption_category(m));
  }
  if (o->per_category) c.per_category = o->per_category;
  if (o->lexicon) c.lexicon = o->lexicon;
  if (o->donors) c.donors = o->donors;
  if (o->manifest_out) c.manifest_out = o->manifest_out;
  if (o->out_dir) c.out_dir = o->out_dir;
  c.threads = o->threads;
  return c;
}

template <typename Cmd>
mlens_status run_command(const mlens_run_options* options, char** document, Cmd cmd) {
  if (document == nullptr) return fail(MLENS_ERR_INVALID_ARGUMENT, "document pointer is null");
  *document = nullptr;
  if (options == nullptr) return fail(MLENS_ERR_INVALID_ARGUMENT, "options pointer is null");
  return guarded([&] { *document = dup_string(cmd(to_run_config(options))); });
}

}  // namespace

extern "C" {

const char* mlens_version(void) { return "0.1.0"; }

const char* mlens_last_error(void) { return g_last_error.c_str(); }

const char* mlens_status_name(mlens_status status) {
  switch (status) {
    case MLENS_OK: return "OK";
    case MLENS_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case MLENS_ERR_CONFIG: return mlens::error_code_name(mlens::ErrorCode::config);
    case MLENS_ERR_EMPTY_INPUT: return mlens::error_code_name(mlens::ErrorCode::empty_input);
    case MLENS_ERR_PARSE: return mlens::error_code_name(mlens::ErrorCode::parse);
    case MLENS_ERR_SCHEMA: return mlens::error_code_name(mlens::ErrorCode::schema);
    case MLENS_ERR_SPAN: return mlens::error_code_name(mlens::ErrorCode::span);
    case MLENS_ERR_MISSING_SEGMENT: return mlens::error_code_name(mlens::ErrorCode::missing_segment);
    case MLENS_ERR_SHAPE: return mlens::error_code_name(mlens::ErrorCode::shape);
    case MLENS_ERR_TRACE_FORMAT: return mlens::error_code_name(mlens::ErrorCode::trace_format);
    case MLENS_ERR_NO_CORRUPTION_SITE:
      return mlens::error_code_name(mlens::ErrorCode::no_corruption_site);
    case MLENS_ERR_INSUFFICIENT_DONOR:
      return mlens::error_code_name(mlens::ErrorCode::insufficient_donor);
    case MLENS_ERR_INSUFFICIENT_DEV_DATA:
      return mlens::error_code_name(mlens::ErrorCode::insufficient_dev_data);
    case MLENS_ERR_NO_EVALUABLE: return mlens::error_code_name(mlens::ErrorCode::no_evaluable);
    case MLENS_ERR_IO: return mlens::error_code_name(mlens::ErrorCode::io);
    case MLENS_ERR_INTERNAL: return mlens::error_code_name(mlens::ErrorCode::internal);
  }
  return "UnknownError";
}

int mlens_exit_code(mlens_status status) {
  switch (status) {
    case MLENS_OK: return 0;
    case MLENS_ERR_CONFIG:
    case MLENS_ERR_INVALID_ARGUMENT: return 1;
    case MLENS_ERR_SHAPE:
    case MLENS_ERR_INTERNAL: return 3;
    default: return 2;
  }
}

void mlens_string_free(char* s) { std::free(s); }

// ---- corpora

mlens_status mlens_corpus_load_tsv(const char* path, int per_rater, mlens_corpus** out) {
  if (path == nullptr || out == nullptr) return fail(MLENS_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    mlens::MqmOptions opts;
    opts.per_rater = per_rater != 0;
    *out = new mlens_corpus{mlens::parse_mqm_tsv(path, opts)};
  });
}

mlens_status mlens_corpus_parse_tsv(const char* content, int per_rater, mlens_corpus** out) {
  if (content == nullptr || out == nullptr)
    return fail(MLENS_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    mlens::MqmOptions opts;
    opts.per_rater = per_rater != 0;
    *out = new mlens_corpus{mlens::parse_mqm_tsv_string(content, opts)};
  });
}

size_t mlens_corpus_size(const mlens_corpus* corpus) {
  return corpus ? corpus->instances.size() : 0;
}

const char* mlens_corpus_id(const mlens_corpus* corpus, size_t index) {
  if (corpus == nullptr || index >= corpus->instances.size()) return nullptr;
  return corpus->instances[index].id.c_str();
}

size_t mlens_corpus_word_count(const mlens_corpus* corpus, size_t index) {
  if (corpus == nullptr || index >= corpus->instances.size()) return 0;
  return corpus->instances[index].translation.words.size();
}

mlens_status mlens_corpus_labels(const mlens_corpus* corpus, size_t index, int* labels,
                                 size_t capacity, size_t* n_words) {
  if (corpus == nullptr || n_words == nullptr || index >= corpus->instances.size())
    return fail(MLENS_ERR_INVALID_ARGUMENT, "bad corpus or index");
  mlens_status status = MLENS_OK;
  const mlens_status s = guarded([&] {
    const auto& inst = corpus->instances[index];
    const auto l = mlens::label_words(inst.translation, inst.gold_spans);
    *n_words = l.labels.size();
    if (capacity < l.labels.size() || (labels == nullptr && !l.labels.empty())) {
      status = fail(MLENS_ERR_INVALID_ARGUMENT, "label buffer too small");
      return;
    }
    std::copy(l.labels.begin(), l.labels.end(), labels);
  });
  return s != MLENS_OK ? s : status;
}

void mlens_corpus_free(mlens_corpus* corpus) { delete corpus; }

// ---- models and traces

mlens_status mlens_model_create(const char* config_json, mlens_model** out) {
  if (config_json == nullptr || out == nullptr)
    return fail(MLENS_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    const auto spec = mlens::parse_model_config(config_json);
    *out = new mlens_model{mlens::init_model(spec.encoder, spec.architecture)};
  });
}

void mlens_model_free(mlens_model* model) { delete model; }

mlens_status mlens_model_trace(const mlens_model* model, const mlens_corpus* corpus, size_t index,
                               const char* input_config, mlens_trace** out) {
  if (model == nullptr || corpus == nullptr || input_config == nullptr || out == nullptr ||
      index >= corpus->instances.size())
    return fail(MLENS_ERR_INVALID_ARGUMENT, "bad argument");
  *out = nullptr;
  return guarded([&] {
    auto r = mlens::forward_with_trace(model->model, corpus->instances[index],
                                       mlens::parse_input_config(input_config));
    *out = new mlens_trace{std::move(r.trace)};
  });
}

mlens_status mlens_trace_read(const char* dir, mlens_trace** out) {
  if (dir == nullptr || out == nullptr) return fail(MLENS_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new mlens_trace{mlens::read_trace(dir)}; });
}

mlens_status mlens_trace_write(const mlens_trace* trace, const char* dir) {
  if (trace == nullptr || dir == nullptr) return fail(MLENS_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { mlens::write_trace(trace->trace, dir); });
}

double mlens_trace_score(const mlens_trace* trace) { return trace ? trace->trace.score : 0.0; }

void mlens_trace_free(mlens_trace* trace) { delete trace; }

mlens_status mlens_explain(const mlens_trace* trace, const char* method, const char* input_config,
                           double* word_scores, size_t capacity, size_t* n_words) {
  if (trace == nullptr || method == nullptr || input_config == nullptr || n_words == nullptr)
    return fail(MLENS_ERR_INVALID_ARGUMENT, "null argument");
  mlens_status status = MLENS_OK;
  const mlens_status s = guarded([&] {
    const mlens::Method m = mlens::parse_method(method);
    const mlens::InputConfig c = mlens::parse_input_config(input_config);
    const auto& t = trace->trace;
    mlens::Explanation e;
    switch (m) {
      case mlens::Method::embed_align: e = mlens::explain_embed_align(t, c); break;
      case mlens::Method::grad_l2: e = mlens::explain_grad_l2(t); break;
      case mlens::Method::attention:
        e = mlens::ensemble_heads(mlens::explain_attention(t), mlens::all_heads(t.layers, t.heads));
        break;
      case mlens::Method::attn_x_grad:
        e = mlens::ensemble_heads(mlens::explain_attn_grad(t), mlens::all_heads(t.layers, t.heads));
        break;
    }
    *n_words = e.word_scores.size();
    if (capacity < e.word_scores.size() || (word_scores == nullptr && !e.word_scores.empty())) {
      status = fail(MLENS_ERR_INVALID_ARGUMENT, "score buffer too small");
      return;
    }
    std::copy(e.word_scores.begin(), e.word_scores.end(), word_scores);
  });
  return s != MLENS_OK ? s : status;
}

// ---- metrics

mlens_status mlens_auc(const double* scores, const int* labels, size_t n, double* value,
                       int* defined) {
  if ((n > 0 && (scores == nullptr || labels == nullptr)) || value == nullptr || defined == nullptr)
    return fail(MLENS_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto r = mlens::auc({scores, n}, {labels, n});
    *defined = r.has_value();
    *value = r.value_or(0.0);
  });
}

mlens_status mlens_recall_at_k(const double* scores, const int* labels, size_t n, double* value,
                               int* defined) {
  if ((n > 0 && (scores == nullptr || labels == nullptr)) || value == nullptr || defined == nullptr)
    return fail(MLENS_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto r = mlens::recall_at_k({scores, n}, {labels, n});
    *defined = r.has_value();
    *value = r.value_or(0.0);
  });
}

// ---- commands

void mlens_run_options_init(mlens_run_options* options) {
  if (options == nullptr) return;
  std::memset(options, 0, sizeof *options);
  options->top_k = 5;
}

mlens_status mlens_cmd_explain(const mlens_run_options* options, char** document) {
  return run_command(options, document, mlens::cmd_explain);
}

mlens_status mlens_cmd_evaluate(const mlens_run_options* options, char** document) {
  return run_command(options, document, mlens::cmd_evaluate);
}

mlens_status mlens_cmd_select_heads(const mlens_run_options* options, char** document) {
  return run_command(options, document, mlens::cmd_select_heads);
}

mlens_status mlens_cmd_corrupt(const mlens_run_options* options, char** document) {
  return run_command(options, document, mlens::cmd_corrupt);
}

mlens_status mlens_cmd_export_traces(const mlens_run_options* options, char** document) {
  return run_command(options, document, mlens::cmd_export_traces);
}

mlens_status mlens_cmd_validate(const mlens_run_options* options, char** document,
                                size_t* violations) {
  if (violations == nullptr) return fail(MLENS_ERR_INVALID_ARGUMENT, "violations pointer is null");
  *violations = 0;
  return run_command(options, document, [&](const mlens::RunConfig& c) {
    auto r = mlens::cmd_validate(c);
    *violations = r.violations;
    return r.document;
  });
}

}  // extern "C"
