// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#include "evaluation.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <tuple>

namespace mlens {

std::vector<double> subwords_to_words(const Explanation& explanation,
                                      const Sentence& sentence) {
  if (explanation.subword_scores.size() != sentence.subwords.size())
    throw Error(ErrorCode::shape,
                "explanation has " + std::to_string(explanation.subword_scores.size()) +
                    " subword scores, sentence has " +
                    std::to_string(sentence.subwords.size()) + " subwords");
  std::vector<std::size_t> word_of;
  word_of.reserve(sentence.subwords.size());
  for (const auto& sw : sentence.subwords) word_of.push_back(sw.word_index);
  return max_per_word(explanation.subword_scores, word_of, sentence.words.size());
}

WordLabels label_words(const Sentence& sentence, std::span<const ErrorSpan> spans) {
  WordLabels out;
  out.labels.assign(sentence.words.size(), 0);
  for (const auto& span : spans) {
    if (span.char_start >= span.char_end || span.char_end > sentence.text.size())
      throw Error(ErrorCode::span, "span [" + std::to_string(span.char_start) + ", " +
                                       std::to_string(span.char_end) +
                                       ") outside a text of " +
                                       std::to_string(sentence.text.size()) + " bytes");
    for (std::size_t w = 0; w < sentence.words.size(); ++w) {
      const auto& word = sentence.words[w];
      if (word.char_start < span.char_end && span.char_start < word.char_end)
        out.labels[w] = 1;
    }
  }
  return out;
}

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::shape, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int l : labels) pos += l != 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;

  // Rank-sum form with mid-ranks for ties.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] != 0) rank_sum += mid_rank;
    i = j + 1;
  }
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

std::optional<double> recall_at_k(std::span<const double> scores,
                                  std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::shape, "scores and labels differ in length");
  std::size_t k = 0;
  for (int l : labels) k += l != 0;
  if (k == 0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) hits += labels[order[i]] != 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

std::vector<double> error_oriented(Method method, std::span<const double> scores) {
  std::vector<double> out(scores.begin(), scores.end());
  if (method == Method::embed_align)
    for (double& s : out) s = 1.0 - s;
  return out;
}

SentenceResult score_sentence(std::string lang_pair, std::string method,
                              std::string input_config, std::string category,
                              std::vector<double> word_scores, const WordLabels& labels) {
  SentenceResult r;
  r.lang_pair = std::move(lang_pair);
  r.method = std::move(method);
  r.input_config = std::move(input_config);
  r.category = std::move(category);
  r.auc = auc(word_scores, labels.labels);
  r.recall_at_k = recall_at_k(word_scores, labels.labels);
  r.word_scores = std::move(word_scores);
  r.labels = labels.labels;
  return r;
}

Grouping parse_grouping(std::string_view keys) {
  Grouping g{false, false, false, false};
  std::size_t start = 0;
  while (start <= keys.size()) {
    const std::size_t comma = std::min(keys.find(',', start), keys.size());
    const std::string_view key = keys.substr(start, comma - start);
    if (key == "lang_pair" || key == "lp") g.lang_pair = true;
    else if (key == "method") g.method = true;
    else if (key == "input_config" || key == "inputs" || key == "config") g.input_config = true;
    else if (key == "category" || key == "error_category") g.category = true;
    else if (!key.empty())
      throw Error(ErrorCode::config, "unknown group-by key '" + std::string(key) + "'");
    start = comma + 1;
  }
  return g;
}

namespace {

using Key = std::tuple<std::string, std::string, std::string, std::string>;

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<EvalReport> aggregate(std::span<const SentenceResult> results,
                                  const Grouping& grouping, Averaging averaging) {
  std::map<Key, std::vector<const SentenceResult*>> groups;
  for (const auto& r : results) {
    Key key{grouping.lang_pair ? r.lang_pair : kCollapsedKey,
            grouping.method ? r.method : kCollapsedKey,
            grouping.input_config ? r.input_config : kCollapsedKey,
            grouping.category ? r.category : kCollapsedKey};
    groups[key].push_back(&r);
  }

  std::vector<EvalReport> out;
  for (const auto& [key, members] : groups) {
    EvalReport rep;
    std::tie(rep.lang_pair, rep.method, rep.input_config, rep.category) = key;
    std::vector<double> aucs, rks;
    for (const auto* r : members) {
      if (r->auc) aucs.push_back(*r->auc);
      if (r->recall_at_k) rks.push_back(*r->recall_at_k);
    }
    rep.n_sentences_auc = aucs.size();
    rep.n_sentences_rk = rks.size();
    if (rep.n_sentences_auc == 0 && rep.n_sentences_rk == 0) continue;
    if (averaging == Averaging::macro) {
      rep.auc = mean_of(aucs);
      rep.recall_at_k = mean_of(rks);
    } else {
      std::vector<double> scores;
      std::vector<int> labels;
      for (const auto* r : members) {
        scores.insert(scores.end(), r->word_scores.begin(), r->word_scores.end());
        labels.insert(labels.end(), r->labels.begin(), r->labels.end());
      }
      rep.auc = auc(scores, labels);
      rep.recall_at_k = recall_at_k(scores, labels);
    }
    out.push_back(std::move(rep));
  }
  return out;
}

std::vector<EvalReport> average_over_lang_pairs(std::span<const EvalReport> reports) {
  struct Acc {
    std::vector<double> aucs, rks;
    std::size_t n_auc = 0, n_rk = 0;
  };
  std::map<std::tuple<std::string, std::string, std::string>, Acc> acc;
  for (const auto& r : reports) {
    if (r.lang_pair == kAverageLangPair) continue;
    auto& a = acc[{r.method, r.input_config, r.category}];
    if (r.auc) a.aucs.push_back(*r.auc);
    if (r.recall_at_k) a.rks.push_back(*r.recall_at_k);
    a.n_auc += r.n_sentences_auc;
    a.n_rk += r.n_sentences_rk;
  }
  std::vector<EvalReport> out;
  for (const auto& [key, a] : acc) {
    EvalReport rep;
    rep.lang_pair = kAverageLangPair;
    std::tie(rep.method, rep.input_config, rep.category) = key;
    rep.auc = mean_of(a.aucs);
    rep.recall_at_k = mean_of(a.rks);
    rep.n_sentences_auc = a.n_auc;
    rep.n_sentences_rk = a.n_rk;
    out.push_back(std::move(rep));
  }
  return out;
}

}  // namespace mlens
