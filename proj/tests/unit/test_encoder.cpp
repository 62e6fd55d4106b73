// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "encoder.hpp"
#include "helpers.hpp"

using namespace mlens;
using mlens::testing::make_instance;
using mlens::testing::max_abs_diff;

namespace {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

// Straight-line reimplementation of the scoring pass from the parameter
// tensors, written without reference to the library's loops.
struct Token {
  std::string text;
  bool sep;
  int segment;
  int pos;
  SegmentTag tag;
};

Mat matmul(const Mat& x, const Matrix& w, const Vec& b) {
  Mat y(x.size(), Vec(w.cols));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t c = 0; c < w.cols; ++c) {
      double s = b[c];
      for (std::size_t k = 0; k < w.rows; ++k) s += x[i][k] * w(k, c);
      y[i][c] = s;
    }
  return y;
}

Mat layernorm(const Mat& x) {
  Mat y = x;
  for (auto& row : y) {
    double mean = 0, var = 0;
    for (double v : row) mean += v;
    mean /= row.size();
    for (double v : row) var += (v - mean) * (v - mean);
    var /= row.size();
    for (double& v : row) v = (v - mean) / std::sqrt(var + 1e-5);
  }
  return y;
}

double gelu(double x) { return x * 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double oracle_score(const MetricModel& model, const EvaluationInstance& inst, InputConfig c) {
  const auto& cfg = model.config();
  const auto& P = model.params();
  const bool joint = model.architecture() == Architecture::joint;
  const std::size_t d = cfg.d_model, H = cfg.heads, dh = d / H;

  std::vector<Token> toks;
  int seg = 0, pos = 0;
  auto add = [&](const Sentence& s, SegmentTag tag) {
    if (!joint) pos = 0;
    for (const auto& sw : s.subwords) toks.push_back({sw.text, false, seg, pos++, tag});
    if (!joint) ++seg;
  };
  add(inst.translation, SegmentTag::mt);
  if (c != InputConfig::ref) {
    if (joint) toks.push_back({"", true, seg, pos++, SegmentTag::sep});
    add(inst.source, SegmentTag::src);
  }
  if (c != InputConfig::src) {
    if (joint) toks.push_back({"", true, seg, pos++, SegmentTag::sep});
    add(*inst.reference, SegmentTag::ref);
  }

  const std::size_t S = toks.size();
  Mat x(S, Vec(d));
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      const double e = toks[i].sep ? P.sep_embedding[k]
                                   : P.token_embedding(fnv1a64(toks[i].text) % cfg.vocab_size, k);
      const double freq = std::pow(10000.0, -static_cast<double>(k - k % 2) / d);
      const double pe = k % 2 == 0 ? std::sin(toks[i].pos * freq) : std::cos(toks[i].pos * freq);
      x[i][k] = e + pe;
    }

  for (const auto& L : P.layers) {
    const Mat q = matmul(x, L.wq, L.bq), kk = matmul(x, L.wk, L.bk), v = matmul(x, L.wv, L.bv);
    Mat o(S, Vec(d, 0.0));
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t i = 0; i < S; ++i) {
        Vec logits(S, -INFINITY);
        for (std::size_t j = 0; j < S; ++j) {
          if (toks[i].segment != toks[j].segment) continue;
          double s = 0;
          for (std::size_t t = h * dh; t < (h + 1) * dh; ++t) s += q[i][t] * kk[j][t];
          logits[j] = s / std::sqrt(static_cast<double>(dh));
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0;
        for (double& l : logits) z += (l = std::exp(l - mx));
        for (std::size_t j = 0; j < S; ++j)
          for (std::size_t t = h * dh; t < (h + 1) * dh; ++t) o[i][t] += logits[j] / z * v[j][t];
      }
    Mat a = matmul(o, L.wo, L.bo);
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t k = 0; k < d; ++k) a[i][k] += x[i][k];
    const Mat h1 = layernorm(a);
    Mat u = matmul(h1, L.w1, L.b1);
    for (auto& row : u)
      for (double& z : row) z = gelu(z);
    Mat f = matmul(u, L.w2, L.b2);
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t k = 0; k < d; ++k) f[i][k] += h1[i][k];
    x = layernorm(f);
  }

  Vec feat;
  if (joint) {
    feat = x[0];
  } else {
    auto pool = [&](SegmentTag tag) {
      Vec m(d, 0.0);
      int n = 0;
      for (std::size_t i = 0; i < S; ++i)
        if (toks[i].tag == tag) {
          ++n;
          for (std::size_t k = 0; k < d; ++k) m[k] += x[i][k];
        }
      for (double& z : m) z /= n;
      return m;
    };
    const Vec m = pool(SegmentTag::mt);
    std::vector<SegmentTag> ctx;
    if (c != InputConfig::ref) ctx.push_back(SegmentTag::src);
    if (c != InputConfig::src) ctx.push_back(SegmentTag::ref);
    for (SegmentTag t : ctx) {
      const Vec e = pool(t);
      for (std::size_t k = 0; k < d; ++k) feat.push_back(m[k]);
      for (std::size_t k = 0; k < d; ++k) feat.push_back(e[k]);
      for (std::size_t k = 0; k < d; ++k) feat.push_back(m[k] * e[k]);
      for (std::size_t k = 0; k < d; ++k) feat.push_back(std::fabs(m[k] - e[k]));
    }
  }
  double score = P.head.b2;
  for (std::size_t j = 0; j < cfg.d_ff; ++j) {
    double pre = P.head.b1[j];
    for (std::size_t f = 0; f < feat.size(); ++f) pre += feat[f] * P.head.w1(f, j);
    score += gelu(pre) * P.head.w2[j];
  }
  return score;
}

const EvaluationInstance kInst =
    make_instance("The cat sat on relativity", "猫坐在垫子上", "A cat is sitting there");

}  // namespace

TEST_CASE("forward pass agrees with an independent reimplementation") {
  for (Architecture arch : {Architecture::joint, Architecture::separate})
    for (InputConfig c : {InputConfig::src, InputConfig::ref, InputConfig::src_ref}) {
      const auto model = init_model({2, 2, 8, 12, 97, 5}, arch);
      const double got = forward_with_trace(model, kInst, c).score;
      CHECK(std::fabs(got - oracle_score(model, kInst, c)) <= 1e-10);
    }
}

TEST_CASE("initialization is seed-deterministic") {
  const auto a = init_model({1, 2, 8, 16, 64, 9}, Architecture::joint);
  const auto b = init_model({1, 2, 8, 16, 64, 9}, Architecture::joint);
  const auto c = init_model({1, 2, 8, 16, 64, 10}, Architecture::joint);
  CHECK(a.params().token_embedding.data == b.params().token_embedding.data);
  CHECK(a.params().token_embedding.data != c.params().token_embedding.data);
  // First draw of the stream is the first token-embedding entry.
  Xoshiro256 rng(9);
  CHECK(a.params().token_embedding.data[0] == rng.uniform(-0.1, 0.1));
  for (double v : a.params().layers[0].wq.data) CHECK(std::fabs(v) <= 0.1);
  CHECK(a.params().layers[0].ln1_gain == std::vector<double>(8, 1.0));
}

TEST_CASE("model config errors") {
  CHECK_THROWS_AS(init_model({1, 3, 8, 16, 64, 0}, Architecture::joint), Error);
  CHECK_THROWS_AS(init_model({0, 1, 8, 16, 64, 0}, Architecture::joint), Error);
}

TEST_CASE("reference configs need a reference") {
  const auto model = init_model({1, 1, 8, 8, 64, 1}, Architecture::separate);
  auto inst = kInst;
  inst.reference.reset();
  CHECK_NOTHROW(forward_with_trace(model, inst, InputConfig::src));
  CHECK_THROWS_MATCHES(forward_with_trace(model, inst, InputConfig::ref), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::missing_segment;
                       }));
}

TEST_CASE("joint layout interleaves separators") {
  const auto model = init_model({1, 1, 8, 8, 64, 1}, Architecture::joint);
  const auto t = forward_with_trace(model, kInst, InputConfig::src_ref).trace;
  const std::size_t mt = kInst.translation.subwords.size();
  REQUIRE(t.seq() == mt + kInst.source.subwords.size() + kInst.reference->subwords.size() + 2);
  CHECK(t.layout[mt].tag == SegmentTag::sep);
  CHECK(t.layout[mt].word_index == -1);
  CHECK(t.layout[0].text == "The");
  CHECK(t.layout[mt - 1].text == "vity");
  CHECK(t.producer == "metric-lens toy encoder");
}

TEST_CASE("separate encoding isolates segments") {
  const auto model = init_model({2, 2, 8, 16, 64, 4}, Architecture::separate);
  const auto t = forward_with_trace(model, kInst, InputConfig::src_ref).trace;
  for (std::size_t l = 0; l < t.layers; ++l)
    for (std::size_t h = 0; h < t.heads; ++h)
      for (std::size_t i = 0; i < t.seq(); ++i)
        for (std::size_t j = 0; j < t.seq(); ++j)
          if (t.layout[i].tag != t.layout[j].tag) CHECK(t.attention.at(l, h, i, j) == 0.0);

  // MT hidden states cannot depend on the source text.
  auto other = kInst;
  other.source = tokenize("completely different words here");
  const auto t2 = forward_with_trace(model, other, InputConfig::src_ref).trace;
  const std::size_t n = kInst.translation.subwords.size() * t.d_model;
  CHECK(std::equal(t.embeddings.data.begin(), t.embeddings.data.begin() + n,
                   t2.embeddings.data.begin()));
}

TEST_CASE("reverse-mode gradients match central differences") {
  for (Architecture arch : {Architecture::joint, Architecture::separate}) {
    const auto model = init_model({2, 2, 8, 16, 64, 21}, arch);
    const auto inst = make_instance("a quick cat", "猫", "the cat");
    const auto t = forward_with_trace(model, inst, InputConfig::src_ref).trace;
    const auto fd = finite_difference_grads(model, inst, InputConfig::src_ref, 1e-4);
    CHECK(max_abs_diff(t.input_embedding_grads.data, fd.input_embedding_grads.data) < 1e-8);
    CHECK(max_abs_diff(t.value_grads.data, fd.value_grads.data) < 1e-8);
  }
}

TEST_CASE("single-token value gradient is linear in the attention-output gradient") {
  // A one-token segment attends only to itself, so d score / d v_h equals the
  // head's block of W_o applied to d score / d (attention output).
  const auto m = init_model({2, 2, 8, 16, 64, 33}, Architecture::separate);
  const EvaluationInstance inst = make_instance("cat", "x", std::nullopt);
  const auto t = forward_with_trace(m, inst, InputConfig::src).trace;
  const auto g = detail::attention_output_grads(m, inst, InputConfig::src);
  const std::size_t dh = m.d_head();
  for (std::size_t l = 0; l < m.config().layers; ++l)
    for (std::size_t h = 0; h < m.config().heads; ++h)
      for (std::size_t c = 0; c < dh; ++c) {
        double expect = 0;
        for (std::size_t k = 0; k < m.config().d_model; ++k)
          expect += m.params().layers[l].wo(h * dh + c, k) * g[l](0, k);
        CHECK(std::fabs(t.value_grads.at(l, h, 0, c) - expect) <= 1e-12);
      }
}

TEST_CASE("attention output perturbation hook matches its reverse gradient") {
  const auto model = init_model({2, 1, 6, 12, 64, 8}, Architecture::joint);
  const auto inst = make_instance("one two", "drei", "three four");
  const auto g = detail::attention_output_grads(model, inst, InputConfig::ref);
  detail::Perturbation p;
  p.target = detail::Perturbation::Target::attention_output;
  p.layer = 1;
  p.pos = 1;
  p.col = 2;
  const double h = 1e-5;
  p.delta = h;
  const double up = detail::score_only(model, inst, InputConfig::ref, p);
  p.delta = -h;
  const double down = detail::score_only(model, inst, InputConfig::ref, p);
  CHECK((up - down) / (2 * h) == Catch::Approx(g[1](1, 2)).margin(1e-9));
}
