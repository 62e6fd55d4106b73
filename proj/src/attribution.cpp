// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#include "attribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace mlens {

namespace {

struct MtView {
  std::vector<std::size_t> positions;
  std::vector<std::size_t> word_of_subword;
  std::size_t word_count = 0;
};

MtView mt_view(const ModelTrace& trace) {
  MtView v;
  for (std::size_t i = 0; i < trace.seq(); ++i) {
    const auto& e = trace.layout[i];
    if (e.tag != SegmentTag::mt) continue;
    if (e.word_index < 0)
      throw Error(ErrorCode::shape, "MT layout entry without a word index");
    v.positions.push_back(i);
    v.word_of_subword.push_back(static_cast<std::size_t>(e.word_index));
    v.word_count = std::max(v.word_count, static_cast<std::size_t>(e.word_index) + 1);
  }
  if (v.positions.empty()) throw Error(ErrorCode::missing_segment, "trace has no MT segment");
  return v;
}

Explanation make_explanation(Method method, InputConfig config, const MtView& mt,
                             std::vector<double> subword_scores) {
  Explanation e;
  e.method = method;
  e.input_config = config;
  e.word_scores = max_per_word(subword_scores, mt.word_of_subword, mt.word_count);
  e.subword_scores = std::move(subword_scores);
  e.word_of_subword = mt.word_of_subword;
  return e;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void require_4d(const Tensor& t, const char* name, std::size_t L, std::size_t H,
                std::size_t S, std::size_t last) {
  if (t.shape != std::vector<std::size_t>{L, H, S, last})
    throw Error(ErrorCode::shape, std::string(name) + " shape does not match trace header");
}

std::vector<double> received_attention(const ModelTrace& trace, std::size_t l,
                                       std::size_t h, const MtView& mt) {
  const auto all = received_attention_all(trace, l, h);
  std::vector<double> out;
  out.reserve(mt.positions.size());
  for (std::size_t j : mt.positions) out.push_back(all[j]);
  return out;
}

}  // namespace

std::vector<double> received_attention_all(const ModelTrace& trace, std::size_t layer,
                                           std::size_t head) {
  const std::size_t S = trace.seq();
  require_4d(trace.attention, "attention", trace.layers, trace.heads, S, S);
  if (layer >= trace.layers || head >= trace.heads)
    throw Error(ErrorCode::shape, "head outside the trace");
  std::vector<double> out(S, 0.0);
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t j = 0; j < S; ++j) out[j] += trace.attention.at(layer, head, i, j);
  for (double& x : out) x /= static_cast<double>(S);
  return out;
}

Explanation explain_embed_align(const ModelTrace& trace, InputConfig config) {
  const MtView mt = mt_view(trace);
  if (trace.embeddings.shape != std::vector<std::size_t>{trace.seq(), trace.d_model})
    throw Error(ErrorCode::shape, "embeddings shape does not match trace header");
  std::vector<std::size_t> context;
  for (std::size_t i = 0; i < trace.seq(); ++i) {
    const SegmentTag tag = trace.layout[i].tag;
    if ((tag == SegmentTag::src && uses_source(config)) ||
        (tag == SegmentTag::ref && uses_reference(config)))
      context.push_back(i);
  }
  if (context.empty())
    throw Error(ErrorCode::missing_segment,
                std::string("trace has no context tokens for input config ") +
                    to_string(config));

  std::vector<double> ctx_norm;
  for (std::size_t c : context) ctx_norm.push_back(norm2(trace.embeddings.row(c)));

  std::vector<double> scores;
  for (std::size_t p : mt.positions) {
    const auto e = trace.embeddings.row(p);
    const double en = norm2(e);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < context.size(); ++k) {
      double cos = 0.0;
      if (en > 0.0 && ctx_norm[k] > 0.0) {
        const auto c = trace.embeddings.row(context[k]);
        double dot = 0.0;
        for (std::size_t x = 0; x < e.size(); ++x) dot += e[x] * c[x];
        cos = dot / (en * ctx_norm[k]);
      }
      best = std::max(best, cos);
    }
    scores.push_back(best);
  }
  return make_explanation(Method::embed_align, config, mt, std::move(scores));
}

Explanation explain_grad_l2(const ModelTrace& trace) {
  const MtView mt = mt_view(trace);
  if (trace.input_embedding_grads.shape !=
      std::vector<std::size_t>{trace.seq(), trace.d_model})
    throw Error(ErrorCode::shape, "input_embedding_grads shape does not match trace header");
  std::vector<double> scores;
  for (std::size_t p : mt.positions) scores.push_back(norm2(trace.input_embedding_grads.row(p)));
  return make_explanation(Method::grad_l2, trace.input_config, mt, std::move(scores));
}

std::vector<Explanation> explain_attention(const ModelTrace& trace,
                                           AttentionReduction reduction) {
  const MtView mt = mt_view(trace);
  const std::size_t S = trace.seq();
  require_4d(trace.attention, "attention", trace.layers, trace.heads, S, S);
  std::vector<Explanation> out;
  for (std::size_t l = 0; l < trace.layers; ++l)
    for (std::size_t h = 0; h < trace.heads; ++h) {
      std::vector<double> scores;
      if (reduction == AttentionReduction::received) {
        scores = received_attention(trace, l, h, mt);
      } else {
        for (std::size_t i : mt.positions) {
          double sent = 0.0;
          for (std::size_t j = 0; j < S; ++j) {
            const SegmentTag tag = trace.layout[j].tag;
            if (tag == SegmentTag::src || tag == SegmentTag::ref)
              sent += trace.attention.at(l, h, i, j);
          }
          scores.push_back(sent);
        }
      }
      auto e = make_explanation(Method::attention, trace.input_config, mt, std::move(scores));
      e.head = HeadId{l, h};
      out.push_back(std::move(e));
    }
  return out;
}

std::vector<Explanation> explain_attn_grad(const ModelTrace& trace) {
  const MtView mt = mt_view(trace);
  const std::size_t S = trace.seq();
  require_4d(trace.attention, "attention", trace.layers, trace.heads, S, S);
  require_4d(trace.value_grads, "value_grads", trace.layers, trace.heads, S, trace.d_head);
  const std::size_t dh = trace.d_head;
  std::vector<Explanation> out;
  for (std::size_t l = 0; l < trace.layers; ++l)
    for (std::size_t h = 0; h < trace.heads; ++h) {
      std::vector<double> scores = received_attention(trace, l, h, mt);
      for (std::size_t n = 0; n < mt.positions.size(); ++n) {
        const std::size_t j = mt.positions[n];
        const double* g = trace.value_grads.data.data() + ((l * trace.heads + h) * S + j) * dh;
        scores[n] *= norm2({g, dh});
      }
      auto e = make_explanation(Method::attn_x_grad, trace.input_config, mt, std::move(scores));
      e.head = HeadId{l, h};
      out.push_back(std::move(e));
    }
  return out;
}

HeadRanking select_top_heads(std::span<const std::vector<Explanation>> dev,
                             std::span<const WordLabels> labels, std::size_t k) {
  if (dev.size() != labels.size())
    throw Error(ErrorCode::shape, "dev explanations and labels differ in length");
  if (dev.empty()) throw Error(ErrorCode::insufficient_dev_data, "empty development set");
  const std::size_t n_heads = dev.front().size();
  if (k == 0 || k > n_heads)
    throw Error(ErrorCode::config, "top-k " + std::to_string(k) + " outside [1, " +
                                       std::to_string(n_heads) + "] heads");

  std::vector<HeadId> ids;
  for (std::size_t h = 0; h < n_heads; ++h)
    ids.push_back(dev.front()[h].head.value_or(HeadId{0, h}));
  std::vector<double> sum(n_heads, 0.0);
  std::vector<std::size_t> count(n_heads, 0);
  for (std::size_t s = 0; s < dev.size(); ++s) {
    if (dev[s].size() != n_heads)
      throw Error(ErrorCode::shape, "sentences disagree on the number of heads");
    for (std::size_t h = 0; h < n_heads; ++h) {
      const auto scores = error_oriented(dev[s][h].method, dev[s][h].word_scores);
      if (scores.size() != labels[s].labels.size())
        throw Error(ErrorCode::shape, "word scores and labels differ in length");
      if (auto a = auc(scores, labels[s].labels)) {
        sum[h] += *a;
        ++count[h];
      }
    }
  }
  if (std::all_of(count.begin(), count.end(), [](std::size_t c) { return c == 0; }))
    throw Error(ErrorCode::insufficient_dev_data,
                "no development sentence has both error and correct words");

  HeadRanking r;
  for (std::size_t h = 0; h < n_heads; ++h)
    r.head_auc.emplace_back(ids[h], count[h] ? sum[h] / static_cast<double>(count[h]) : 0.0);
  std::stable_sort(r.head_auc.begin(), r.head_auc.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (std::size_t i = 0; i < k; ++i) r.selected.push_back(r.head_auc[i].first);
  return r;
}

Explanation ensemble_heads(std::span<const Explanation> per_head, const HeadRanking& ranking) {
  if (ranking.selected.empty()) throw Error(ErrorCode::config, "head ranking selects no heads");
  if (per_head.empty()) throw Error(ErrorCode::shape, "no per-head explanations");
  std::map<HeadId, const Explanation*> by_head;
  for (std::size_t i = 0; i < per_head.size(); ++i)
    by_head[per_head[i].head.value_or(HeadId{0, i})] = &per_head[i];

  const Explanation& first = per_head.front();
  const std::size_t n = first.subword_scores.size();
  std::vector<double> acc(n, 0.0);
  for (const HeadId& id : ranking.selected) {
    auto it = by_head.find(id);
    if (it == by_head.end())
      throw Error(ErrorCode::shape, "ranking selects head (" + std::to_string(id.layer) + "," +
                                        std::to_string(id.head) + ") absent from explanations");
    const auto& s = it->second->subword_scores;
    if (s.size() != n) throw Error(ErrorCode::shape, "per-head explanations differ in length");
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    const double range = *hi - *lo;
    if (range > 0.0)
      for (std::size_t j = 0; j < n; ++j) acc[j] += (s[j] - *lo) / range;
  }
  for (double& x : acc) x /= static_cast<double>(ranking.selected.size());

  Explanation e;
  e.method = first.method;
  e.input_config = first.input_config;
  e.word_of_subword = first.word_of_subword;
  if (e.word_of_subword.empty()) {
    e.word_of_subword.resize(n);
    std::iota(e.word_of_subword.begin(), e.word_of_subword.end(), std::size_t{0});
  }
  const std::size_t words = first.word_scores.empty() ? n : first.word_scores.size();
  e.word_scores = max_per_word(acc, e.word_of_subword, words);
  e.subword_scores = std::move(acc);
  return e;
}

HeadRanking all_heads(std::size_t layers, std::size_t heads) {
  HeadRanking r;
  for (std::size_t l = 0; l < layers; ++l)
    for (std::size_t h = 0; h < heads; ++h) {
      r.selected.push_back({l, h});
      r.head_auc.emplace_back(HeadId{l, h}, 0.0);
    }
  return r;
}

}  // namespace mlens
