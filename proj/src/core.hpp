// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0
//
// Domain types shared by every module: tokenized sentences, gold error spans,
// model traces and token-level explanations.

#ifndef METRIC_LENS_CORE_HPP_
#define METRIC_LENS_CORE_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace mlens {

struct Word {
  std::string text;
  std::size_t char_start = 0;  // byte offset into the sentence text
  std::size_t char_end = 0;    // exclusive
};

struct Subword {
  std::string text;
  std::size_t word_index = 0;
  std::size_t position = 0;
  bool continuation = false;  // true for every chunk after the first of a word
};

struct Sentence {
  std::string text;
  std::vector<Word> words;
  std::vector<Subword> subwords;
};

enum class Severity { minor, major, critical };

struct ErrorSpan {
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  Severity severity = Severity::minor;
  std::string category;

  friend bool operator==(const ErrorSpan&, const ErrorSpan&) = default;
};

struct EvaluationInstance {
  std::string id;
  std::string lang_pair;
  Sentence source;
  Sentence translation;
  std::optional<Sentence> reference;
  std::vector<ErrorSpan> gold_spans;
  std::map<std::string, std::string> metadata;
};

enum class SegmentTag { mt, src, ref, sep };
enum class InputConfig { src, ref, src_ref };
enum class Architecture { separate, joint };
enum class Method { embed_align, grad_l2, attention, attn_x_grad };

inline bool uses_source(InputConfig c) { return c != InputConfig::ref; }
inline bool uses_reference(InputConfig c) { return c != InputConfig::src; }

// Dense row-major float64 tensor.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims);

  std::size_t rank() const { return shape.size(); }
  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }

  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  double& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }
  double at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * shape[1], shape[1]};
  }
};

std::size_t shape_product(std::span<const std::size_t> shape);

struct LayoutEntry {
  SegmentTag tag = SegmentTag::mt;
  long word_index = -1;      // -1 for separator tokens
  std::size_t position = 0;  // subword index within its own sentence
  std::string text;

  friend bool operator==(const LayoutEntry&, const LayoutEntry&) = default;
};

inline constexpr std::string_view kBuiltinTokenizer = "builtin-chunk6";

// Everything the four attribution methods consume for one scored input.
struct ModelTrace {
  Architecture architecture = Architecture::joint;
  InputConfig input_config = InputConfig::ref;
  std::vector<LayoutEntry> layout;
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t d_model = 0;
  std::size_t d_head = 0;
  Tensor embeddings;             // [seq, d_model]
  Tensor input_embedding_grads;  // [seq, d_model]
  Tensor attention;              // [layers, heads, seq, seq]
  Tensor value_grads;            // [layers, heads, seq, d_head]
  double score = 0.0;
  std::string producer;
  std::string tokenizer{kBuiltinTokenizer};
  std::string embedding_layer_note;

  std::size_t seq() const { return layout.size(); }
  std::vector<std::size_t> positions_of(SegmentTag tag) const;
};

struct HeadId {
  std::size_t layer = 0;
  std::size_t head = 0;
  friend auto operator<=>(const HeadId&, const HeadId&) = default;
};

struct Explanation {
  Method method = Method::grad_l2;
  InputConfig input_config = InputConfig::ref;
  std::vector<double> subword_scores;
  std::vector<double> word_scores;
  std::optional<HeadId> head;
  // Word index of each MT subword; needed to re-derive word scores after
  // subword scores are transformed (e.g. by head ensembling).
  std::vector<std::size_t> word_of_subword;
};

// Splits on ASCII whitespace, then chunks each word into pieces of at most
// six code points. Throws ErrorCode::empty_input on blank text and
// ErrorCode::parse on malformed UTF-8.
Sentence tokenize(std::string_view text);

// Returns an empty list for a well-formed trace; never throws.
std::vector<std::string> validate_trace(const ModelTrace& trace,
                                        const EvaluationInstance& instance,
                                        InputConfig config);

// Name <-> enum conversions used by every file format and the CLI.
const char* to_string(SegmentTag tag);
const char* to_string(InputConfig config);
const char* to_string(Architecture arch);
const char* to_string(Method method);
const char* to_string(Severity severity);
SegmentTag parse_segment_tag(std::string_view name);
InputConfig parse_input_config(std::string_view name);
Architecture parse_architecture(std::string_view name);
Method parse_method(std::string_view name);
Severity parse_severity(std::string_view name);

// Word-level max of per-subword scores given each subword's word index.
std::vector<double> max_per_word(std::span<const double> subword_scores,
                                 std::span<const std::size_t> word_of_subword,
                                 std::size_t word_count);

}  // namespace mlens

#endif  // METRIC_LENS_CORE_HPP_
