// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0
//
// Fixtures and brute-force oracles shared by the test binaries. The oracles
// are written independently of the library code they check.

#ifndef METRIC_LENS_TESTS_HELPERS_HPP_
#define METRIC_LENS_TESTS_HELPERS_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "encoder.hpp"
#include "rng.hpp"

namespace mlens::testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(METRIC_LENS_TEST_DATA) / name;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("metric_lens_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline EvaluationInstance make_instance(const std::string& mt, const std::string& src,
                                        std::optional<std::string> ref = std::nullopt,
                                        std::vector<ErrorSpan> spans = {},
                                        std::string id = "t1") {
  EvaluationInstance inst;
  inst.id = std::move(id);
  inst.lang_pair = "zh-en";
  inst.translation = tokenize(mt);
  inst.source = tokenize(src);
  if (ref) inst.reference = tokenize(*ref);
  inst.gold_spans = std::move(spans);
  return inst;
}

inline const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words{
      "the",   "cat",     "sat",  "on",     "a",      "mat",        "not",   "seventeen",
      "Paris", "42",      "house", "green", "river", "relativity", "quick", "extraordinary",
      "Café",  "weather", "is",    "today", "and",   "left",       "early", "dollars"};
  return words;
}

inline std::string random_sentence(Xoshiro256& rng, std::size_t max_words) {
  const auto& v = vocabulary();
  const std::size_t n = 1 + rng.below(max_words);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += v[rng.below(v.size())];
  }
  return s;
}

inline EvaluationInstance random_instance(Xoshiro256& rng, std::size_t max_words,
                                          bool with_reference = true) {
  return make_instance(random_sentence(rng, max_words), random_sentence(rng, max_words),
                       with_reference ? std::optional(random_sentence(rng, max_words))
                                      : std::nullopt);
}

// Mann-Whitney AUC by enumerating every (positive, negative) pair.
inline std::optional<double> brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        ++pairs;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  if (pairs == 0) return std::nullopt;
  return wins / static_cast<double>(pairs);
}

// Sort by score (earlier index first on ties), cut at K = #positives,
// intersect with the positives.
inline std::optional<double> brute_recall(const std::vector<double>& s,
                                          const std::vector<int>& y) {
  const auto k = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  if (k == 0) return std::nullopt;
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return s[a] != s[b] ? s[a] > s[b] : a < b;
  });
  std::size_t hit = 0;
  for (std::size_t i = 0; i < k; ++i) hit += y[idx[i]] == 1;
  return static_cast<double>(hit) / static_cast<double>(k);
}

// Nested-loop max cosine from each MT row to the context rows.
inline std::vector<double> brute_embed_align(const ModelTrace& t,
                                             const std::vector<SegmentTag>& context) {
  std::vector<double> out;
  for (std::size_t i = 0; i < t.seq(); ++i) {
    if (t.layout[i].tag != SegmentTag::mt) continue;
    double best = -INFINITY;
    for (std::size_t j = 0; j < t.seq(); ++j) {
      if (std::find(context.begin(), context.end(), t.layout[j].tag) == context.end()) continue;
      double dot = 0, na = 0, nb = 0;
      for (std::size_t c = 0; c < t.d_model; ++c) {
        const double a = t.embeddings.data[i * t.d_model + c];
        const double b = t.embeddings.data[j * t.d_model + c];
        dot += a * b;
        na += a * a;
        nb += b * b;
      }
      const double cos = (na == 0 || nb == 0) ? 0.0 : dot / (std::sqrt(na) * std::sqrt(nb));
      best = std::max(best, cos);
    }
    out.push_back(best);
  }
  return out;
}

// A trace with only the fields the embedding extractor reads.
inline ModelTrace embedding_trace(const std::vector<std::vector<double>>& mt,
                                  const std::vector<std::vector<double>>& src,
                                  const std::vector<std::vector<double>>& ref) {
  ModelTrace t;
  t.d_model = mt.empty() ? (ref.empty() ? src.front().size() : ref.front().size())
                         : mt.front().size();
  auto add = [&](const std::vector<std::vector<double>>& rows, SegmentTag tag) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      t.layout.push_back({tag, static_cast<long>(i), i, "w" + std::to_string(i)});
      t.embeddings.data.insert(t.embeddings.data.end(), rows[i].begin(), rows[i].end());
    }
  };
  add(mt, SegmentTag::mt);
  add(src, SegmentTag::src);
  add(ref, SegmentTag::ref);
  t.embeddings.shape = {t.layout.size(), t.d_model};
  t.input_config = src.empty() ? InputConfig::ref
                               : (ref.empty() ? InputConfig::src : InputConfig::src_ref);
  return t;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return a.size() == b.size() ? m : INFINITY;
}

}  // namespace mlens::testing

#endif  // METRIC_LENS_TESTS_HELPERS_HPP_
