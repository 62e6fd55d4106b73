// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0
//
// Randomized invariants. Every loop uses a fixed seed so failures reproduce.

#include <catch2/catch_amalgamated.hpp>

#include "attribution.hpp"
#include "corruption.hpp"
#include "encoder.hpp"
#include "evaluation.hpp"
#include "helpers.hpp"
#include "io.hpp"

using namespace mlens;
using namespace mlens::testing;

namespace {

void random_scores(Xoshiro256& rng, std::size_t n, std::vector<double>& s, std::vector<int>& y) {
  s.resize(n);
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.below(3) == 0 ? static_cast<double>(rng.below(3)) : rng.uniform(-2.0, 2.0);
    y[i] = static_cast<int>(rng.below(2));
  }
}

}  // namespace

TEST_CASE("AUC is bounded, antisymmetric and rank-based") {
  Xoshiro256 rng(101);
  std::vector<double> s;
  std::vector<int> y;
  for (int trial = 0; trial < 500; ++trial) {
    random_scores(rng, 2 + rng.below(30), s, y);
    const auto a = auc(s, y);
    if (!a) continue;
    CHECK((*a >= 0.0 && *a <= 1.0));
    std::vector<double> neg(s.size()), mono(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      neg[i] = -s[i];
      mono[i] = std::exp(s[i]) * 3.0 + 1.0;
    }
    CHECK(*auc(neg, y) == Catch::Approx(1.0 - *a).margin(1e-12));
    CHECK(*auc(mono, y) == Catch::Approx(*a).margin(1e-12));
    std::vector<int> flipped(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) flipped[i] = 1 - y[i];
    CHECK(*auc(s, flipped) == Catch::Approx(1.0 - *a).margin(1e-12));
  }
}

TEST_CASE("Recall@K is bounded and perfect for the label vector itself") {
  Xoshiro256 rng(102);
  std::vector<double> s;
  std::vector<int> y;
  for (int trial = 0; trial < 500; ++trial) {
    random_scores(rng, 1 + rng.below(30), s, y);
    const auto r = recall_at_k(s, y);
    if (!r) continue;
    CHECK((*r >= 0.0 && *r <= 1.0));
    const std::vector<double> oracle(y.begin(), y.end());
    CHECK(recall_at_k(oracle, y) == 1.0);
    CHECK(auc(oracle, y).value_or(1.0) == 1.0);
  }
}

TEST_CASE("tokenization preserves the text") {
  Xoshiro256 rng(103);
  for (int trial = 0; trial < 300; ++trial) {
    const std::string text = random_sentence(rng, 10);
    const Sentence s = tokenize(text);
    std::size_t sub = 0;
    for (std::size_t w = 0; w < s.words.size(); ++w) {
      const auto& word = s.words[w];
      CHECK(text.substr(word.char_start, word.char_end - word.char_start) == word.text);
      std::string joined;
      for (; sub < s.subwords.size() && s.subwords[sub].word_index == w; ++sub)
        joined += s.subwords[sub].text;
      CHECK(joined == word.text);
    }
    CHECK(sub == s.subwords.size());
  }
}

TEST_CASE("embed-align is bounded and ignores positive rescaling") {
  Xoshiro256 rng(104);
  for (Architecture arch : {Architecture::joint, Architecture::separate}) {
    const auto model = init_model({1, 2, 8, 16, 64, 21}, arch);
    for (int trial = 0; trial < 30; ++trial) {
      const auto inst = random_instance(rng, 6);
      auto t = forward_with_trace(model, inst, InputConfig::src_ref).trace;
      const auto base = explain_embed_align(t, InputConfig::src_ref).subword_scores;
      for (double v : base) CHECK((v >= -1.0 - 1e-12 && v <= 1.0 + 1e-12));
      for (std::size_t i = 0; i < t.seq(); ++i) {
        const double c = 0.01 + rng.uniform(0.0, 50.0);
        for (std::size_t k = 0; k < t.d_model; ++k) t.embeddings.at(i, k) *= c;
      }
      CHECK(max_abs_diff(explain_embed_align(t, InputConfig::src_ref).subword_scores, base) <=
            1e-12);
    }
  }
}

TEST_CASE("attention invariants hold on random inputs") {
  Xoshiro256 rng(105);
  for (Architecture arch : {Architecture::joint, Architecture::separate}) {
    const auto model = init_model({2, 2, 8, 16, 64, 22}, arch);
    for (int trial = 0; trial < 20; ++trial) {
      const auto inst = random_instance(rng, 5);
      for (InputConfig c : {InputConfig::src, InputConfig::ref, InputConfig::src_ref}) {
        const auto t = forward_with_trace(model, inst, c).trace;
        CHECK(validate_trace(t, inst, c).empty());
        const auto heads = explain_attention(t);
        REQUIRE(heads.size() == 4);
        for (const auto& h : heads)
          for (double v : h.subword_scores) CHECK((v >= 0.0 && v <= 1.0));
        const auto e = ensemble_heads(heads, all_heads(2, 2));
        for (double v : e.subword_scores) CHECK((v >= 0.0 && v <= 1.0 + 1e-12));
        for (const auto& h : explain_attn_grad(t))
          for (double v : h.subword_scores) CHECK(v >= 0.0);
      }
    }
  }
}

TEST_CASE("corruptions stay in bounds and change the text") {
  Xoshiro256 rng(106);
  const auto lexicon = load_entity_lexicon(data_path("entity_lexicon.tsv"));
  const auto donors = load_donor_corpus(data_path("donors.txt"));
  const auto corpus = parse_mqm_tsv(data_path("corpus.tsv"));
  std::size_t made = 0;
  for (const auto& inst : corpus) {
    if (!eligible(inst)) continue;
    for (CorruptionCategory cat : {CorruptionCategory::neg, CorruptionCategory::hall,
                                   CorruptionCategory::ne, CorruptionCategory::num}) {
      CorruptionSpec spec{cat, rng.next(), donors, lexicon};
      try {
        const auto c = corrupt(inst, spec);
        const auto& text = c.instance.translation.text;
        CHECK(c.span.char_start < c.span.char_end);
        CHECK(c.span.char_end <= text.size());
        CHECK(text != inst.translation.text);
        const auto labels = label_words(c.instance.translation, c.instance.gold_spans).labels;
        CHECK(std::count(labels.begin(), labels.end(), 1) >= 1);
        ++made;
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::no_corruption_site);
      }
    }
  }
  CHECK(made >= 200);
}
