// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0
//
// Word-level scoring of explanations against gold error spans: AUC,
// Recall@K and report aggregation.

#ifndef METRIC_LENS_EVALUATION_HPP_
#define METRIC_LENS_EVALUATION_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"

namespace mlens {

struct WordLabels {
  std::vector<int> labels;  // 1 = word overlaps a gold span
};

// Word score = max over the word's subwords. Throws ErrorCode::shape when the
// explanation and sentence disagree on length.
std::vector<double> subwords_to_words(const Explanation& explanation,
                                      const Sentence& sentence);

// Throws ErrorCode::span for spans outside the sentence text.
WordLabels label_words(const Sentence& sentence, std::span<const ErrorSpan> spans);

// Mann-Whitney AUC; nullopt when labels are single-class.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

// K = number of positives; the top K words by score (earlier position wins
// ties) are intersected with the positives. nullopt when there are none.
std::optional<double> recall_at_k(std::span<const double> scores,
                                  std::span<const int> labels);

// Scores oriented so that higher means "more likely an error". Alignment
// similarity is flipped (1 - s); every other method is already oriented.
std::vector<double> error_oriented(Method method, std::span<const double> scores);

struct SentenceResult {
  std::string lang_pair;
  std::string method;
  std::string input_config;
  std::string category;
  std::vector<double> word_scores;  // error-oriented
  std::vector<int> labels;
  std::optional<double> auc;
  std::optional<double> recall_at_k;
};

SentenceResult score_sentence(std::string lang_pair, std::string method,
                              std::string input_config, std::string category,
                              std::vector<double> word_scores, const WordLabels& labels);

struct Grouping {
  bool lang_pair = true;
  bool method = true;
  bool input_config = true;
  bool category = false;
};

// Parses a comma-separated key list, e.g. "lang_pair,method,category".
Grouping parse_grouping(std::string_view keys);

enum class Averaging { macro, micro };

inline constexpr const char* kCollapsedKey = "all";
inline constexpr const char* kAverageLangPair = "Avg.";

struct EvalReport {
  std::string lang_pair;
  std::string method;
  std::string input_config;
  std::string category;
  std::optional<double> auc;
  std::optional<double> recall_at_k;
  std::size_t n_sentences_auc = 0;
  std::size_t n_sentences_rk = 0;
};

// Groups are keyed by the enabled Grouping fields (collapsed ones become
// "all") and emitted in key order. Groups with no defined metric are omitted.
std::vector<EvalReport> aggregate(std::span<const SentenceResult> results,
                                  const Grouping& grouping,
                                  Averaging averaging = Averaging::macro);

// One "Avg." row per (method, input_config, category): the unweighted mean of
// the per-language-pair values.
std::vector<EvalReport> average_over_lang_pairs(std::span<const EvalReport> reports);

}  // namespace mlens

#endif  // METRIC_LENS_EVALUATION_HPP_
