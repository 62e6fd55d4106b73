/* Copyright 2026 The metric-lens Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the metric-lens toolkit: token-level explanations for
 * neural MT evaluation metrics, scored against MQM error spans.
 *
 * Every fallible call returns an mlens_status. On failure a message is
 * available from mlens_last_error() until the next call on the same thread.
 * Objects are opaque and released with their matching *_free function.
 * Strings returned through char** out-parameters are owned by the caller and
 * released with mlens_string_free().
 */
#ifndef METRIC_LENS_METRIC_LENS_H_
#define METRIC_LENS_METRIC_LENS_H_

#include <stddef.h>
#include <stdint.h>

#if defined(MLENS_BUILDING_LIBRARY)
#define MLENS_API __attribute__((visibility("default")))
#else
#define MLENS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mlens_status {
  MLENS_OK = 0,
  MLENS_ERR_CONFIG,
  MLENS_ERR_EMPTY_INPUT,
  MLENS_ERR_PARSE,
  MLENS_ERR_SCHEMA,
  MLENS_ERR_SPAN,
  MLENS_ERR_MISSING_SEGMENT,
  MLENS_ERR_SHAPE,
  MLENS_ERR_TRACE_FORMAT,
  MLENS_ERR_NO_CORRUPTION_SITE,
  MLENS_ERR_INSUFFICIENT_DONOR,
  MLENS_ERR_INSUFFICIENT_DEV_DATA,
  MLENS_ERR_NO_EVALUABLE,
  MLENS_ERR_IO,
  MLENS_ERR_INTERNAL,
  MLENS_ERR_INVALID_ARGUMENT
} mlens_status;

MLENS_API const char* mlens_version(void);
MLENS_API const char* mlens_last_error(void);
/* Error class name, e.g. "ParseError". */
MLENS_API const char* mlens_status_name(mlens_status status);
/* Process exit code: 0 ok, 1 usage/config, 2 data/format, 3 internal. */
MLENS_API int mlens_exit_code(mlens_status status);
MLENS_API void mlens_string_free(char* s);

/* ---- corpora ---------------------------------------------------------- */

typedef struct mlens_corpus mlens_corpus;

MLENS_API mlens_status mlens_corpus_load_tsv(const char* path, int per_rater,
                                             mlens_corpus** out);
MLENS_API mlens_status mlens_corpus_parse_tsv(const char* content, int per_rater,
                                              mlens_corpus** out);
MLENS_API size_t mlens_corpus_size(const mlens_corpus* corpus);
/* Borrowed; valid while the corpus lives. NULL when out of range. */
MLENS_API const char* mlens_corpus_id(const mlens_corpus* corpus, size_t index);
MLENS_API size_t mlens_corpus_word_count(const mlens_corpus* corpus, size_t index);
/* Writes 1/0 gold labels per translation word. */
MLENS_API mlens_status mlens_corpus_labels(const mlens_corpus* corpus, size_t index,
                                           int* labels, size_t capacity, size_t* n_words);
MLENS_API void mlens_corpus_free(mlens_corpus* corpus);

/* ---- toy models and traces -------------------------------------------- */

typedef struct mlens_model mlens_model;
typedef struct mlens_trace mlens_trace;

/* JSON text with keys architecture ("separate" | "joint"), layers, heads,
 * d_model, d_ff, vocab_size, seed. */
MLENS_API mlens_status mlens_model_create(const char* config_json, mlens_model** out);
MLENS_API void mlens_model_free(mlens_model* model);

/* input_config is "src", "ref" or "src+ref". */
MLENS_API mlens_status mlens_model_trace(const mlens_model* model, const mlens_corpus* corpus,
                                         size_t index, const char* input_config,
                                         mlens_trace** out);
MLENS_API mlens_status mlens_trace_read(const char* dir, mlens_trace** out);
MLENS_API mlens_status mlens_trace_write(const mlens_trace* trace, const char* dir);
MLENS_API double mlens_trace_score(const mlens_trace* trace);
MLENS_API void mlens_trace_free(mlens_trace* trace);

/* Word-level scores of one method ("embed-align", "grad-l2", "attention",
 * "attn-grad"); attention methods are averaged over every head. When
 * capacity is too small, *n_words is set and MLENS_ERR_INVALID_ARGUMENT is
 * returned. */
MLENS_API mlens_status mlens_explain(const mlens_trace* trace, const char* method,
                                     const char* input_config, double* word_scores,
                                     size_t capacity, size_t* n_words);

/* ---- metrics ---------------------------------------------------------- */

/* *defined is 0 when the metric is undefined (single-class labels, or no
 * positives for Recall@K). */
MLENS_API mlens_status mlens_auc(const double* scores, const int* labels, size_t n,
                                 double* value, int* defined);
MLENS_API mlens_status mlens_recall_at_k(const double* scores, const int* labels, size_t n,
                                         double* value, int* defined);

/* ---- commands --------------------------------------------------------- */

typedef struct mlens_run_options {
  const char* const* inputs; /* MQM-style TSV paths */
  size_t n_inputs;
  int per_rater;
  const char* lang_pair; /* default language pair when the TSV has none */

  const char* model_config; /* path; exactly one of model_config, traces */
  const char* traces;

  const char* methods;       /* comma list; NULL = all four */
  const char* input_configs; /* comma list; NULL = src,ref,src+ref */
  const char* heads_file;
  size_t top_k; /* default 5 */
  int has_seed;
  uint64_t seed;
  const char* reduction; /* "received" (default) or "emitted" */

  const char* format;   /* json | tsv | markdown */
  const char* group_by; /* comma list of lang_pair, method, input_config, category */
  int micro;
  int include_oracle;

  const char* html_dir;

  const char* categories; /* comma list of NEG, HALL, NE, NUM */
  size_t per_category;    /* 0 = no limit */
  const char* lexicon;
  const char* donors;
  const char* manifest_out;

  const char* out_dir;

  size_t threads; /* 0 = METRIC_LENS_THREADS or hardware concurrency */
} mlens_run_options;

MLENS_API void mlens_run_options_init(mlens_run_options* options);

MLENS_API mlens_status mlens_cmd_explain(const mlens_run_options* options, char** document);
MLENS_API mlens_status mlens_cmd_evaluate(const mlens_run_options* options, char** document);
MLENS_API mlens_status mlens_cmd_select_heads(const mlens_run_options* options,
                                              char** document);
MLENS_API mlens_status mlens_cmd_corrupt(const mlens_run_options* options, char** document);
MLENS_API mlens_status mlens_cmd_export_traces(const mlens_run_options* options,
                                               char** document);
/* Succeeds even when violations are found; their count goes to *violations. */
MLENS_API mlens_status mlens_cmd_validate(const mlens_run_options* options, char** document,
                                          size_t* violations);

#ifdef __cplusplus
}
#endif

#endif /* METRIC_LENS_METRIC_LENS_H_ */
