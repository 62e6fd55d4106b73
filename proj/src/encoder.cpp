// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#include "encoder.hpp"

#include <cmath>
#include <numbers>

#include "rng.hpp"

namespace mlens {

namespace {

constexpr double kLayerNormEps = 1e-5;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// y = x W + b
Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
  Matrix y(x.rows, w.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t c = 0; c < w.cols; ++c) y(i, c) = b[c];
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double xik = x(i, k);
      for (std::size_t c = 0; c < w.cols; ++c) y(i, c) += xik * w(k, c);
    }
  }
  return y;
}

// dx += dy W^T
void accumulate_backprop(const Matrix& dy, const Matrix& w, Matrix& dx) {
  for (std::size_t i = 0; i < dy.rows; ++i)
    for (std::size_t k = 0; k < w.rows; ++k) {
      double acc = 0.0;
      for (std::size_t c = 0; c < w.cols; ++c) acc += dy(i, c) * w(k, c);
      dx(i, k) += acc;
    }
}

struct NormCache {
  Matrix xhat;
  std::vector<double> rstd;
};

Matrix layer_norm(const Matrix& x, const std::vector<double>& gain,
                  const std::vector<double>& bias, NormCache& cache) {
  Matrix y(x.rows, x.cols);
  cache.xhat = Matrix(x.rows, x.cols);
  cache.rstd.assign(x.rows, 0.0);
  const double n = static_cast<double>(x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double mean = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) mean += x(i, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) var += (x(i, c) - mean) * (x(i, c) - mean);
    var /= n;
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.rstd[i] = rstd;
    for (std::size_t c = 0; c < x.cols; ++c) {
      cache.xhat(i, c) = (x(i, c) - mean) * rstd;
      y(i, c) = gain[c] * cache.xhat(i, c) + bias[c];
    }
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const std::vector<double>& gain,
                           const NormCache& cache) {
  Matrix dx(dy.rows, dy.cols);
  const double n = static_cast<double>(dy.cols);
  for (std::size_t i = 0; i < dy.rows; ++i) {
    double mean_d = 0.0, mean_dx = 0.0;
    for (std::size_t c = 0; c < dy.cols; ++c) {
      const double d = dy(i, c) * gain[c];
      mean_d += d;
      mean_dx += d * cache.xhat(i, c);
    }
    mean_d /= n;
    mean_dx /= n;
    for (std::size_t c = 0; c < dy.cols; ++c) {
      const double d = dy(i, c) * gain[c];
      dx(i, c) = cache.rstd[i] * (d - mean_d - cache.xhat(i, c) * mean_dx);
    }
  }
  return dx;
}

struct Sequence {
  std::vector<LayoutEntry> layout;
  std::vector<std::size_t> segment;   // tokens attend only within a segment
  std::vector<std::size_t> position;  // positional-encoding index
};

Sequence build_sequence(const MetricModel& model, const EvaluationInstance& inst,
                        InputConfig config) {
  if (uses_reference(config) && !inst.reference)
    throw Error(ErrorCode::missing_segment,
                "instance '" + inst.id + "' has no reference, required by input config " +
                    to_string(config));
  const bool joint = model.architecture() == Architecture::joint;
  Sequence seq;
  std::size_t next_pos = 0;
  std::size_t segment = 0;
  auto add_sentence = [&](const Sentence& s, SegmentTag tag) {
    if (!joint) next_pos = 0;
    for (const auto& sw : s.subwords) {
      seq.layout.push_back({tag, static_cast<long>(sw.word_index), sw.position, sw.text});
      seq.segment.push_back(segment);
      seq.position.push_back(next_pos++);
    }
    if (!joint) ++segment;
  };
  auto add_sep = [&]() {
    seq.layout.push_back({SegmentTag::sep, -1, 0, "</s>"});
    seq.segment.push_back(segment);
    seq.position.push_back(next_pos++);
  };
  add_sentence(inst.translation, SegmentTag::mt);
  if (uses_source(config)) {
    if (joint) add_sep();
    add_sentence(inst.source, SegmentTag::src);
  }
  if (uses_reference(config)) {
    if (joint) add_sep();
    add_sentence(*inst.reference, SegmentTag::ref);
  }
  return seq;
}

struct LayerCache {
  Matrix x_in, q, k, v, o;
  std::vector<Matrix> attn;  // per head [seq, seq]
  NormCache ln1, ln2;
  Matrix h1, u;
};

struct ForwardCache {
  Sequence seq;
  std::vector<LayerCache> layers;
  Matrix final;
  std::vector<std::vector<std::size_t>> pooled_positions;  // separate only: mt, then contexts
  std::vector<std::vector<double>> pooled;
  std::vector<double> features;
  std::vector<double> head_pre;
  double score = 0.0;
};

void run_forward(const MetricModel& model, const EvaluationInstance& inst,
                 InputConfig config, const detail::Perturbation& p,
                 ForwardCache& fc) {
  using Target = detail::Perturbation::Target;
  const auto& cfg = model.config();
  const auto& params = model.params();
  const std::size_t d = cfg.d_model, H = cfg.heads, dh = model.d_head();

  fc.seq = build_sequence(model, inst, config);
  const std::size_t S = fc.seq.layout.size();

  Matrix x(S, d);
  for (std::size_t i = 0; i < S; ++i) {
    const auto& e = fc.seq.layout[i];
    for (std::size_t c = 0; c < d; ++c) {
      const double tok = e.tag == SegmentTag::sep
                             ? params.sep_embedding[c]
                             : params.token_embedding(token_id(e.text, cfg.vocab_size), c);
      x(i, c) = tok + positional_encoding(fc.seq.position[i], c, d);
    }
  }
  if (p.target == Target::input) x(p.pos, p.col) += p.delta;

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  fc.layers.assign(cfg.layers, {});
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto& lp = params.layers[l];
    auto& lc = fc.layers[l];
    lc.x_in = x;
    lc.q = affine(x, lp.wq, lp.bq);
    lc.k = affine(x, lp.wk, lp.bk);
    lc.v = affine(x, lp.wv, lp.bv);
    if (p.target == Target::value && p.layer == l) lc.v(p.pos, p.col) += p.delta;

    lc.o = Matrix(S, d);
    lc.attn.assign(H, Matrix(S, S));
    for (std::size_t h = 0; h < H; ++h) {
      Matrix& a = lc.attn[h];
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < S; ++i) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < S; ++j) {
          if (fc.seq.segment[i] != fc.seq.segment[j]) continue;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += lc.q(i, off + c) * lc.k(j, off + c);
          a(i, j) = s * scale;
          mx = std::max(mx, a(i, j));
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < S; ++j) {
          if (fc.seq.segment[i] != fc.seq.segment[j]) continue;  // stays exactly 0
          a(i, j) = std::exp(a(i, j) - mx);
          sum += a(i, j);
        }
        for (std::size_t j = 0; j < S; ++j) a(i, j) /= sum;
        for (std::size_t j = 0; j < S; ++j) {
          const double w = a(i, j);
          if (w == 0.0) continue;
          for (std::size_t c = 0; c < dh; ++c) lc.o(i, off + c) += w * lc.v(j, off + c);
        }
      }
    }
    Matrix attn_out = affine(lc.o, lp.wo, lp.bo);
    if (p.target == Target::attention_output && p.layer == l)
      attn_out(p.pos, p.col) += p.delta;

    Matrix r1 = x;
    for (std::size_t n = 0; n < r1.data.size(); ++n) r1.data[n] += attn_out.data[n];
    lc.h1 = layer_norm(r1, lp.ln1_gain, lp.ln1_bias, lc.ln1);
    lc.u = affine(lc.h1, lp.w1, lp.b1);
    Matrix g = lc.u;
    for (double& z : g.data) z = gelu(z);
    Matrix r2 = affine(g, lp.w2, lp.b2);
    for (std::size_t n = 0; n < r2.data.size(); ++n) r2.data[n] += lc.h1.data[n];
    x = layer_norm(r2, lp.ln2_gain, lp.ln2_bias, lc.ln2);
  }
  fc.final = x;

  fc.features.clear();
  fc.pooled.clear();
  fc.pooled_positions.clear();
  if (model.architecture() == Architecture::joint) {
    fc.features.assign(x.data.begin(), x.data.begin() + static_cast<long>(d));
  } else {
    std::vector<SegmentTag> tags{SegmentTag::mt};
    if (uses_source(config)) tags.push_back(SegmentTag::src);
    if (uses_reference(config)) tags.push_back(SegmentTag::ref);
    for (SegmentTag tag : tags) {
      std::vector<std::size_t> pos;
      for (std::size_t i = 0; i < S; ++i)
        if (fc.seq.layout[i].tag == tag) pos.push_back(i);
      std::vector<double> mean(d, 0.0);
      for (std::size_t i : pos)
        for (std::size_t c = 0; c < d; ++c) mean[c] += x(i, c);
      for (double& m : mean) m /= static_cast<double>(pos.size());
      fc.pooled_positions.push_back(std::move(pos));
      fc.pooled.push_back(std::move(mean));
    }
    const auto& m = fc.pooled[0];
    for (std::size_t b = 1; b < fc.pooled.size(); ++b) {
      const auto& c = fc.pooled[b];
      fc.features.insert(fc.features.end(), m.begin(), m.end());
      fc.features.insert(fc.features.end(), c.begin(), c.end());
      for (std::size_t k = 0; k < d; ++k) fc.features.push_back(m[k] * c[k]);
      for (std::size_t k = 0; k < d; ++k) fc.features.push_back(std::abs(m[k] - c[k]));
    }
  }

  const auto& head = params.head;
  fc.head_pre.assign(head.b1.begin(), head.b1.end());
  for (std::size_t f = 0; f < fc.features.size(); ++f)
    for (std::size_t k = 0; k < cfg.d_ff; ++k) fc.head_pre[k] += fc.features[f] * head.w1(f, k);
  fc.score = head.b2;
  for (std::size_t k = 0; k < cfg.d_ff; ++k) fc.score += gelu(fc.head_pre[k]) * head.w2[k];
}

struct Backward {
  Matrix input_grads;
  Tensor value_grads;
  std::vector<Matrix> attn_out_grads;
};

Backward run_backward(const MetricModel& model, const ForwardCache& fc) {
  const auto& cfg = model.config();
  const auto& params = model.params();
  const std::size_t d = cfg.d_model, H = cfg.heads, dh = model.d_head(), L = cfg.layers;
  const std::size_t S = fc.seq.layout.size();
  Backward out;
  out.value_grads = Tensor({L, H, S, dh});
  out.attn_out_grads.assign(L, Matrix());

  const auto& head = params.head;
  std::vector<double> dfeat(fc.features.size(), 0.0);
  for (std::size_t k = 0; k < cfg.d_ff; ++k) {
    const double dpre = head.w2[k] * gelu_grad(fc.head_pre[k]);
    for (std::size_t f = 0; f < fc.features.size(); ++f) dfeat[f] += head.w1(f, k) * dpre;
  }

  Matrix dx(S, d);
  if (model.architecture() == Architecture::joint) {
    for (std::size_t c = 0; c < d; ++c) dx(0, c) = dfeat[c];
  } else {
    const auto& m = fc.pooled[0];
    std::vector<double> dm(d, 0.0);
    for (std::size_t b = 1; b < fc.pooled.size(); ++b) {
      const auto& c = fc.pooled[b];
      const double* f = dfeat.data() + (b - 1) * 4 * d;
      std::vector<double> dc(d, 0.0);
      for (std::size_t k = 0; k < d; ++k) {
        const double sgn = m[k] > c[k] ? 1.0 : (m[k] < c[k] ? -1.0 : 0.0);
        dm[k] += f[k] + c[k] * f[2 * d + k] + sgn * f[3 * d + k];
        dc[k] = f[d + k] + m[k] * f[2 * d + k] - sgn * f[3 * d + k];
      }
      const auto& pos = fc.pooled_positions[b];
      for (std::size_t i : pos)
        for (std::size_t k = 0; k < d; ++k) dx(i, k) += dc[k] / static_cast<double>(pos.size());
    }
    const auto& pos = fc.pooled_positions[0];
    for (std::size_t i : pos)
      for (std::size_t k = 0; k < d; ++k) dx(i, k) += dm[k] / static_cast<double>(pos.size());
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = L; l-- > 0;) {
    const auto& lp = params.layers[l];
    const auto& lc = fc.layers[l];

    Matrix dr2 = layer_norm_backward(dx, lp.ln2_gain, lc.ln2);
    Matrix dh1 = dr2;
    Matrix dg(S, cfg.d_ff);
    accumulate_backprop(dr2, lp.w2, dg);
    for (std::size_t n = 0; n < dg.data.size(); ++n) dg.data[n] *= gelu_grad(lc.u.data[n]);
    accumulate_backprop(dg, lp.w1, dh1);
    Matrix dr1 = layer_norm_backward(dh1, lp.ln1_gain, lc.ln1);
    out.attn_out_grads[l] = dr1;

    Matrix dxin = dr1;
    Matrix d_o(S, d);
    accumulate_backprop(dr1, lp.wo, d_o);
    Matrix dq(S, d), dk(S, d), dv(S, d);
    for (std::size_t h = 0; h < H; ++h) {
      const Matrix& a = lc.attn[h];
      const std::size_t off = h * dh;
      Matrix da(S, S);
      for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j < S; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < dh; ++c) acc += d_o(i, off + c) * lc.v(j, off + c);
          da(i, j) = acc;
          const double w = a(i, j);
          if (w != 0.0)
            for (std::size_t c = 0; c < dh; ++c) dv(j, off + c) += w * d_o(i, off + c);
        }
      for (std::size_t i = 0; i < S; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < S; ++j) dot += a(i, j) * da(i, j);
        for (std::size_t j = 0; j < S; ++j) {
          const double ds = a(i, j) * (da(i, j) - dot) * scale;
          if (ds == 0.0) continue;
          for (std::size_t c = 0; c < dh; ++c) {
            dq(i, off + c) += ds * lc.k(j, off + c);
            dk(j, off + c) += ds * lc.q(i, off + c);
          }
        }
      }
      for (std::size_t j = 0; j < S; ++j)
        for (std::size_t c = 0; c < dh; ++c) out.value_grads.at(l, h, j, c) = dv(j, off + c);
    }
    accumulate_backprop(dq, lp.wq, dxin);
    accumulate_backprop(dk, lp.wk, dxin);
    accumulate_backprop(dv, lp.wv, dxin);
    dx = std::move(dxin);
  }
  out.input_grads = std::move(dx);
  return out;
}

}  // namespace

void check_config(const EncoderConfig& c) {
  if (c.layers == 0 || c.heads == 0 || c.d_model == 0 || c.d_ff == 0 || c.vocab_size == 0)
    throw Error(ErrorCode::config, "encoder counts must all be >= 1");
  if (c.d_model % c.heads != 0)
    throw Error(ErrorCode::config, "d_model (" + std::to_string(c.d_model) +
                                       ") is not divisible by heads (" +
                                       std::to_string(c.heads) + ")");
}

MetricModel::MetricModel(EncoderConfig config, Architecture arch, ModelParams params)
    : config_(config), arch_(arch), params_(std::move(params)) {
  check_config(config_);
  if (params_.layers.size() != config_.layers ||
      params_.token_embedding.rows != config_.vocab_size ||
      params_.token_embedding.cols != config_.d_model ||
      params_.head.w1.rows != feature_width() || params_.head.w1.cols != config_.d_ff)
    throw Error(ErrorCode::config, "model parameters do not match the encoder config");
}

std::size_t MetricModel::feature_width() const {
  return arch_ == Architecture::joint ? config_.d_model : 8 * config_.d_model;
}

MetricModel init_model(const EncoderConfig& config, Architecture arch) {
  check_config(config);
  Xoshiro256 rng(config.seed);
  auto fill = [&](std::vector<double>& v) {
    for (double& x : v) x = rng.uniform(-0.1, 0.1);
  };
  auto matrix = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    fill(m.data);
    return m;
  };
  auto vec = [&](std::size_t n) {
    std::vector<double> v(n);
    fill(v);
    return v;
  };
  const std::size_t d = config.d_model, ff = config.d_ff;
  ModelParams p;
  p.token_embedding = matrix(config.vocab_size, d);
  p.sep_embedding = vec(d);
  for (std::size_t l = 0; l < config.layers; ++l) {
    LayerParams lp;
    lp.wq = matrix(d, d);
    lp.bq = vec(d);
    lp.wk = matrix(d, d);
    lp.bk = vec(d);
    lp.wv = matrix(d, d);
    lp.bv = vec(d);
    lp.wo = matrix(d, d);
    lp.bo = vec(d);
    lp.w1 = matrix(d, ff);
    lp.b1 = vec(ff);
    lp.w2 = matrix(ff, d);
    lp.b2 = vec(d);
    lp.ln1_gain.assign(d, 1.0);
    lp.ln1_bias.assign(d, 0.0);
    lp.ln2_gain.assign(d, 1.0);
    lp.ln2_bias.assign(d, 0.0);
    p.layers.push_back(std::move(lp));
  }
  const std::size_t width = arch == Architecture::joint ? d : 8 * d;
  p.head.w1 = matrix(width, ff);
  p.head.b1 = vec(ff);
  p.head.w2 = vec(ff);
  p.head.b2 = rng.uniform(-0.1, 0.1);
  return MetricModel(config, arch, std::move(p));
}

std::size_t token_id(std::string_view text, std::size_t vocab_size) {
  return static_cast<std::size_t>(fnv1a64(text) % vocab_size);
}

double positional_encoding(std::size_t pos, std::size_t dim, std::size_t d_model) {
  const double exponent =
      static_cast<double>(2 * (dim / 2)) / static_cast<double>(d_model);
  const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
  return dim % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

ForwardResult forward_with_trace(const MetricModel& model,
                                 const EvaluationInstance& instance,
                                 InputConfig config) {
  ForwardCache fc;
  run_forward(model, instance, config, {}, fc);
  Backward bw = run_backward(model, fc);

  const auto& cfg = model.config();
  const std::size_t S = fc.seq.layout.size(), d = cfg.d_model;
  ForwardResult r;
  r.score = fc.score;
  ModelTrace& t = r.trace;
  t.architecture = model.architecture();
  t.input_config = config;
  t.layout = fc.seq.layout;
  t.layers = cfg.layers;
  t.heads = cfg.heads;
  t.d_model = d;
  t.d_head = model.d_head();
  t.embeddings = Tensor({S, d});
  t.embeddings.data = fc.final.data;
  t.input_embedding_grads = Tensor({S, d});
  t.input_embedding_grads.data = bw.input_grads.data;
  t.attention = Tensor({cfg.layers, cfg.heads, S, S});
  for (std::size_t l = 0; l < cfg.layers; ++l)
    for (std::size_t h = 0; h < cfg.heads; ++h)
      std::copy(fc.layers[l].attn[h].data.begin(), fc.layers[l].attn[h].data.end(),
                t.attention.data.begin() + static_cast<long>((l * cfg.heads + h) * S * S));
  t.value_grads = std::move(bw.value_grads);
  t.score = fc.score;
  t.producer = "metric-lens toy encoder";
  t.tokenizer = std::string(kBuiltinTokenizer);
  t.embedding_layer_note = "final encoder layer";
  return r;
}

GradientSet finite_difference_grads(const MetricModel& model,
                                    const EvaluationInstance& instance,
                                    InputConfig config, double h) {
  using Target = detail::Perturbation::Target;
  if (!(h > 0.0)) throw Error(ErrorCode::config, "finite-difference step must be > 0");
  const auto& cfg = model.config();
  const std::size_t S = build_sequence(model, instance, config).layout.size();
  const std::size_t d = cfg.d_model, dh = model.d_head();

  auto central = [&](detail::Perturbation p) {
    p.delta = h;
    const double up = detail::score_only(model, instance, config, p);
    p.delta = -h;
    const double down = detail::score_only(model, instance, config, p);
    return (up - down) / (2.0 * h);
  };

  GradientSet g;
  g.input_embedding_grads = Tensor({S, d});
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t c = 0; c < d; ++c)
      g.input_embedding_grads.at(i, c) = central({Target::input, 0, i, c, 0.0});

  g.value_grads = Tensor({cfg.layers, cfg.heads, S, dh});
  for (std::size_t l = 0; l < cfg.layers; ++l)
    for (std::size_t hd = 0; hd < cfg.heads; ++hd)
      for (std::size_t i = 0; i < S; ++i)
        for (std::size_t c = 0; c < dh; ++c)
          g.value_grads.at(l, hd, i, c) = central({Target::value, l, i, hd * dh + c, 0.0});
  return g;
}

namespace detail {

double score_only(const MetricModel& model, const EvaluationInstance& instance,
                  InputConfig config, const Perturbation& p) {
  ForwardCache fc;
  run_forward(model, instance, config, p, fc);
  return fc.score;
}

std::vector<Matrix> attention_output_grads(const MetricModel& model,
                                           const EvaluationInstance& instance,
                                           InputConfig config) {
  ForwardCache fc;
  run_forward(model, instance, config, {}, fc);
  return run_backward(model, fc).attn_out_grads;
}

}  // namespace detail

}  // namespace mlens
