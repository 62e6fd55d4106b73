// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0
//
// A small post-LayerNorm transformer encoder with a hand-written reverse pass.
// Two scoring architectures share the encoder:
//
//  * separate: MT, SRC and REF are encoded independently (block-diagonal
//    attention, positions restart per segment), mean-pooled, and combined as
//    [h_mt; h_ctx; h_mt*h_ctx; |h_mt-h_ctx|] for each context in use.
//  * joint: [mt; SEP; ctx (; SEP; ctx)] is encoded once and the first
//    position is pooled.
//
// Both feed a GELU feed-forward head that returns an unsquashed scalar.

#ifndef METRIC_LENS_ENCODER_HPP_
#define METRIC_LENS_ENCODER_HPP_

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "core.hpp"

namespace mlens {

struct EncoderConfig {
  std::size_t layers = 1;
  std::size_t heads = 1;
  std::size_t d_model = 8;
  std::size_t d_ff = 16;
  std::size_t vocab_size = 256;
  std::uint64_t seed = 0;
};

// Throws ErrorCode::config on zero counts or d_model not divisible by heads.
void check_config(const EncoderConfig& config);

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct LayerParams {
  Matrix wq, wk, wv, wo;  // [d, d]
  std::vector<double> bq, bk, bv, bo;
  std::vector<double> ln1_gain, ln1_bias;
  Matrix w1;  // [d, d_ff]
  std::vector<double> b1;
  Matrix w2;  // [d_ff, d]
  std::vector<double> b2;
  std::vector<double> ln2_gain, ln2_bias;
};

struct HeadParams {
  Matrix w1;  // [feature_width, d_ff]; single-context separate features use the first 4*d rows
  std::vector<double> b1;
  std::vector<double> w2;  // [d_ff]
  double b2 = 0.0;
};

// Draw order, each value uniform in [-0.1, 0.1): token_embedding (row-major),
// sep_embedding, then per layer wq bq wk bk wv bv wo bo w1 b1 w2 b2, then the
// head w1 b1 w2 b2. LayerNorm gains are 1 and biases 0.
struct ModelParams {
  Matrix token_embedding;  // [vocab, d]
  std::vector<double> sep_embedding;
  std::vector<LayerParams> layers;
  HeadParams head;
};

class MetricModel {
 public:
  MetricModel(EncoderConfig config, Architecture arch, ModelParams params);

  const EncoderConfig& config() const { return config_; }
  Architecture architecture() const { return arch_; }
  const ModelParams& params() const { return params_; }
  std::size_t d_head() const { return config_.d_model / config_.heads; }
  std::size_t feature_width() const;

 private:
  EncoderConfig config_;
  Architecture arch_;
  ModelParams params_;
};

MetricModel init_model(const EncoderConfig& config, Architecture arch);

// Hashes the subword text (FNV-1a) into [0, vocab_size).
std::size_t token_id(std::string_view text, std::size_t vocab_size);
double positional_encoding(std::size_t pos, std::size_t dim, std::size_t d_model);

struct ForwardResult {
  double score = 0.0;
  ModelTrace trace;
};

// Throws ErrorCode::missing_segment when the config needs a reference the
// instance lacks.
ForwardResult forward_with_trace(const MetricModel& model,
                                 const EvaluationInstance& instance,
                                 InputConfig config);

struct GradientSet {
  Tensor input_embedding_grads;  // [seq, d]
  Tensor value_grads;            // [layers, heads, seq, d_head]
};

// Central differences (f(x+h) - f(x-h)) / 2h on every input-embedding and
// value-vector coordinate. Test oracle for the reverse pass.
GradientSet finite_difference_grads(const MetricModel& model,
                                    const EvaluationInstance& instance,
                                    InputConfig config, double h);

namespace detail {

// Additive perturbation applied inside the forward pass.
struct Perturbation {
  enum class Target { none, input, value, attention_output } target = Target::none;
  std::size_t layer = 0;
  std::size_t pos = 0;
  std::size_t col = 0;  // column in the full [seq, d] matrix
  double delta = 0.0;
};

double score_only(const MetricModel& model, const EvaluationInstance& instance,
                  InputConfig config, const Perturbation& p);

// Reverse-mode gradient of the score w.r.t. each layer's attention output
// (before the residual add), [layers][seq, d]. Exposed for tests.
std::vector<Matrix> attention_output_grads(const MetricModel& model,
                                           const EvaluationInstance& instance,
                                           InputConfig config);

}  // namespace detail

}  // namespace mlens

#endif  // METRIC_LENS_ENCODER_HPP_
