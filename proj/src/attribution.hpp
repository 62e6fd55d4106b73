// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0
//
// Token-level explanation extractors over a ModelTrace, plus attention-head
// selection and ensembling.

#ifndef METRIC_LENS_ATTRIBUTION_HPP_
#define METRIC_LENS_ATTRIBUTION_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "core.hpp"
#include "evaluation.hpp"

namespace mlens {

// Max cosine similarity between each MT subword embedding and the context
// embeddings selected by `config` (SRC, REF or their union). A zero-norm
// vector contributes cosine 0.
Explanation explain_embed_align(const ModelTrace& trace, InputConfig config);

// l2 norm of each MT subword's input-embedding gradient row.
Explanation explain_grad_l2(const ModelTrace& trace);

// How a head's attention matrix is reduced to one score per MT token.
enum class AttentionReduction {
  received,  // column mean over every query position (default)
  emitted,   // total attention an MT query row sends to context segments
};

// Column mean of one head's attention over every query row, for all S
// positions. Sums to 1 when the rows are normalized.
std::vector<double> received_attention_all(const ModelTrace& trace, std::size_t layer,
                                           std::size_t head);

// One explanation per (layer, head), in layer-major order.
std::vector<Explanation> explain_attention(
    const ModelTrace& trace,
    AttentionReduction reduction = AttentionReduction::received);

// Column-mean attention times the l2 norm of the token's value gradient.
std::vector<Explanation> explain_attn_grad(const ModelTrace& trace);

struct HeadRanking {
  std::vector<std::pair<HeadId, double>> head_auc;  // sorted like `selected`
  std::vector<HeadId> selected;
};

// `dev[s]` holds sentence s's per-head explanations (same head order for all
// sentences); `labels[s]` its word labels. Heads are ranked by macro AUC over
// the sentences where AUC is defined, ties broken by (layer, head).
// Throws ErrorCode::config when k is 0 or exceeds the head count and
// ErrorCode::insufficient_dev_data when no sentence yields a defined AUC.
HeadRanking select_top_heads(std::span<const std::vector<Explanation>> dev,
                             std::span<const WordLabels> labels, std::size_t k = 5);

// Per-sentence min-max normalization of each selected head (constant vectors
// map to zeros), then the elementwise mean.
Explanation ensemble_heads(std::span<const Explanation> per_head,
                           const HeadRanking& ranking);

// Ranking that keeps every head, in (layer, head) order; used when no
// development ranking is supplied.
HeadRanking all_heads(std::size_t layers, std::size_t heads);

}  // namespace mlens

#endif  // METRIC_LENS_ATTRIBUTION_HPP_
