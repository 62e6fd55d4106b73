// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#include "core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace mlens {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::config: return "ConfigError";
    case ErrorCode::empty_input: return "EmptyInput";
    case ErrorCode::parse: return "ParseError";
    case ErrorCode::schema: return "SchemaError";
    case ErrorCode::span: return "SpanError";
    case ErrorCode::missing_segment: return "MissingSegment";
    case ErrorCode::shape: return "ShapeError";
    case ErrorCode::trace_format: return "TraceFormatError";
    case ErrorCode::no_corruption_site: return "NoCorruptionSite";
    case ErrorCode::insufficient_donor: return "InsufficientDonor";
    case ErrorCode::insufficient_dev_data: return "InsufficientDevData";
    case ErrorCode::no_evaluable: return "NoEvaluableSentences";
    case ErrorCode::io: return "IoError";
    case ErrorCode::internal: return "InternalError";
  }
  return "UnknownError";
}

Tensor::Tensor(std::vector<std::size_t> dims)
    : shape(std::move(dims)), data(shape_product(shape), 0.0) {}

std::size_t shape_product(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::vector<std::size_t> ModelTrace::positions_of(SegmentTag tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i].tag == tag) out.push_back(i);
  return out;
}

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

// Length in bytes of the UTF-8 sequence starting at `text[i]`; 0 if invalid.
std::size_t utf8_length(std::string_view text, std::size_t i) {
  const auto lead = static_cast<unsigned char>(text[i]);
  std::size_t len = 0;
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0 && lead >= 0xC2) len = 2;
  else if ((lead & 0xF0) == 0xE0) len = 3;
  else if ((lead & 0xF8) == 0xF0 && lead <= 0xF4) len = 4;
  else return 0;
  if (i + len > text.size()) return 0;
  for (std::size_t k = 1; k < len; ++k)
    if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) return 0;
  return len;
}

constexpr std::size_t kMaxChunkCodepoints = 6;

}  // namespace

Sentence tokenize(std::string_view text) {
  Sentence s;
  s.text = std::string(text);
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < text.size() && !is_space(static_cast<unsigned char>(text[i])))
      ++i;
    const std::size_t word_index = s.words.size();
    s.words.push_back({std::string(text.substr(start, i - start)), start, i});

    std::size_t pos = start;
    bool first = true;
    while (pos < i) {
      std::size_t chunk_end = pos;
      for (std::size_t cp = 0; cp < kMaxChunkCodepoints && chunk_end < i; ++cp) {
        const std::size_t len = utf8_length(text, chunk_end);
        if (len == 0 || chunk_end + len > i)
          throw Error(ErrorCode::parse, "invalid UTF-8 at byte " +
                                            std::to_string(chunk_end));
        chunk_end += len;
      }
      s.subwords.push_back({std::string(text.substr(pos, chunk_end - pos)),
                            word_index, s.subwords.size(), !first});
      first = false;
      pos = chunk_end;
    }
  }
  if (s.words.empty()) throw Error(ErrorCode::empty_input, "empty input text");
  return s;
}

std::vector<double> max_per_word(std::span<const double> subword_scores,
                                 std::span<const std::size_t> word_of_subword,
                                 std::size_t word_count) {
  if (subword_scores.size() != word_of_subword.size())
    throw Error(ErrorCode::shape, "subword score / word map length mismatch");
  std::vector<double> out(word_count, 0.0);
  std::vector<bool> seen(word_count, false);
  for (std::size_t j = 0; j < subword_scores.size(); ++j) {
    const std::size_t w = word_of_subword[j];
    if (w >= word_count)
      throw Error(ErrorCode::shape, "subword maps to word " +
                                        std::to_string(w) + " of " +
                                        std::to_string(word_count));
    out[w] = seen[w] ? std::max(out[w], subword_scores[j]) : subword_scores[j];
    seen[w] = true;
  }
  for (std::size_t w = 0; w < word_count; ++w)
    if (!seen[w])
      throw Error(ErrorCode::shape, "word " + std::to_string(w) +
                                        " has no subwords");
  return out;
}

// --- validation ------------------------------------------------------------

namespace {

const Sentence* sentence_for(const EvaluationInstance& inst, SegmentTag tag) {
  switch (tag) {
    case SegmentTag::mt: return &inst.translation;
    case SegmentTag::src: return &inst.source;
    case SegmentTag::ref: return inst.reference ? &*inst.reference : nullptr;
    case SegmentTag::sep: return nullptr;
  }
  return nullptr;
}

bool shape_is(const Tensor& t, std::initializer_list<std::size_t> dims) {
  return t.shape == std::vector<std::size_t>(dims) &&
         t.data.size() == shape_product(t.shape);
}

std::string shape_str(const Tensor& t) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < t.shape.size(); ++i) os << (i ? "," : "") << t.shape[i];
  os << ']';
  return os.str();
}

}  // namespace

std::vector<std::string> validate_trace(const ModelTrace& trace,
                                        const EvaluationInstance& instance,
                                        InputConfig config) {
  std::vector<std::string> v;
  const std::size_t S = trace.seq();
  const std::size_t L = trace.layers, H = trace.heads;

  if (trace.input_config != config)
    v.push_back(std::string("trace input config is ") +
                to_string(trace.input_config) + ", expected " +
                to_string(config));
  if (uses_reference(config) && !instance.reference)
    v.push_back("instance has no reference but config " +
                std::string(to_string(config)) + " needs one");

  bool shapes_ok = true;
  auto check_shape = [&](const Tensor& t, const char* name,
                         std::initializer_list<std::size_t> dims) {
    if (!shape_is(t, dims)) {
      shapes_ok = false;
      v.push_back(std::string(name) + " has shape " + shape_str(t) +
                  ", inconsistent with layout/header");
    }
  };
  check_shape(trace.embeddings, "embeddings", {S, trace.d_model});
  check_shape(trace.input_embedding_grads, "input_embedding_grads",
              {S, trace.d_model});
  check_shape(trace.attention, "attention", {L, H, S, S});
  check_shape(trace.value_grads, "value_grads", {L, H, S, trace.d_head});

  for (const auto* t : {&trace.embeddings, &trace.input_embedding_grads,
                        &trace.attention, &trace.value_grads}) {
    if (std::any_of(t->data.begin(), t->data.end(),
                    [](double x) { return !std::isfinite(x); })) {
      v.push_back("non-finite value in trace tensor");
      break;
    }
  }
  if (!std::isfinite(trace.score)) v.push_back("non-finite score");

  // Segment bookkeeping.
  std::map<SegmentTag, std::vector<std::size_t>> positions;
  for (std::size_t i = 0; i < S; ++i) {
    const auto& e = trace.layout[i];
    positions[e.tag].push_back(i);
    if (e.tag == SegmentTag::sep) continue;
    const Sentence* s = sentence_for(instance, e.tag);
    if (s == nullptr) {
      v.push_back("layout position " + std::to_string(i) +
                  " refers to a segment the instance lacks");
      continue;
    }
    if (e.word_index < 0 ||
        static_cast<std::size_t>(e.word_index) >= s->words.size())
      v.push_back("layout position " + std::to_string(i) +
                  " has word index out of range");
  }
  if (positions[SegmentTag::mt].empty()) v.push_back("trace has no MT segment");
  if (uses_source(config) && positions[SegmentTag::src].empty())
    v.push_back("trace lacks SRC segment required by config");
  if (uses_reference(config) && positions[SegmentTag::ref].empty())
    v.push_back("trace lacks REF segment required by config");

  const auto& mt = positions[SegmentTag::mt];
  if (trace.tokenizer == kBuiltinTokenizer &&
      mt.size() != instance.translation.subwords.size())
    v.push_back("MT segment has " + std::to_string(mt.size()) +
                " subwords, instance translation has " +
                std::to_string(instance.translation.subwords.size()));
  {
    std::vector<bool> covered(instance.translation.words.size(), false);
    long prev = -1;
    bool ordered = true;
    for (std::size_t p : mt) {
      const long w = trace.layout[p].word_index;
      if (w < prev) ordered = false;
      prev = w;
      if (w >= 0 && static_cast<std::size_t>(w) < covered.size()) covered[w] = true;
    }
    if (!ordered) v.push_back("MT layout word indices are not non-decreasing");
    if (std::find(covered.begin(), covered.end(), false) != covered.end())
      v.push_back("MT layout does not cover every translation word");
  }

  if (!shapes_ok) return v;

  std::size_t bad_rows = 0;
  std::string first_bad;
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t i = 0; i < S; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < S; ++j) sum += trace.attention.at(l, h, i, j);
        if (std::abs(sum - 1.0) > 1e-5) {
          if (bad_rows++ == 0) {
            std::ostringstream os;
            os << "attention not normalized (layer " << l << ", head " << h
               << ", row " << i << ": sum " << sum << ")";
            first_bad = os.str();
          }
        }
      }
  if (bad_rows > 0)
    v.push_back(first_bad + (bad_rows > 1 ? " and " + std::to_string(bad_rows - 1) +
                                                " more rows"
                                          : ""));

  if (trace.architecture == Architecture::separate) {
    std::size_t leaks = 0;
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t i = 0; i < S; ++i)
          for (std::size_t j = 0; j < S; ++j)
            if (trace.layout[i].tag != trace.layout[j].tag &&
                trace.attention.at(l, h, i, j) != 0.0)
              ++leaks;
    if (leaks > 0)
      v.push_back("separate-encoding trace has " + std::to_string(leaks) +
                  " nonzero cross-segment attention entries");
  }
  return v;
}

// --- names -----------------------------------------------------------------

const char* to_string(SegmentTag tag) {
  switch (tag) {
    case SegmentTag::mt: return "MT";
    case SegmentTag::src: return "SRC";
    case SegmentTag::ref: return "REF";
    case SegmentTag::sep: return "SEP";
  }
  return "?";
}

const char* to_string(InputConfig config) {
  switch (config) {
    case InputConfig::src: return "src";
    case InputConfig::ref: return "ref";
    case InputConfig::src_ref: return "src+ref";
  }
  return "?";
}

const char* to_string(Architecture arch) {
  return arch == Architecture::separate ? "separate" : "joint";
}

const char* to_string(Method method) {
  switch (method) {
    case Method::embed_align: return "embed-align";
    case Method::grad_l2: return "grad-l2";
    case Method::attention: return "attention";
    case Method::attn_x_grad: return "attn-grad";
  }
  return "?";
}

const char* to_string(Severity severity) {
  switch (severity) {
    case Severity::minor: return "Minor";
    case Severity::major: return "Major";
    case Severity::critical: return "Critical";
  }
  return "?";
}

namespace {
std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}
}  // namespace

SegmentTag parse_segment_tag(std::string_view name) {
  const auto n = lower(name);
  if (n == "mt") return SegmentTag::mt;
  if (n == "src") return SegmentTag::src;
  if (n == "ref") return SegmentTag::ref;
  if (n == "sep") return SegmentTag::sep;
  throw Error(ErrorCode::trace_format, "unknown segment tag '" + std::string(name) + "'");
}

InputConfig parse_input_config(std::string_view name) {
  const auto n = lower(name);
  if (n == "src") return InputConfig::src;
  if (n == "ref") return InputConfig::ref;
  if (n == "src+ref" || n == "src_ref" || n == "srcref") return InputConfig::src_ref;
  throw Error(ErrorCode::config, "unknown input config '" + std::string(name) +
                                     "' (expected src, ref or src+ref)");
}

Architecture parse_architecture(std::string_view name) {
  const auto n = lower(name);
  if (n == "separate" || n == "comet") return Architecture::separate;
  if (n == "joint" || n == "unite") return Architecture::joint;
  throw Error(ErrorCode::config, "unknown architecture '" + std::string(name) + "'");
}

Method parse_method(std::string_view name) {
  const auto n = lower(name);
  if (n == "embed-align" || n == "embed_align") return Method::embed_align;
  if (n == "grad-l2" || n == "grad_l2") return Method::grad_l2;
  if (n == "attention") return Method::attention;
  if (n == "attn-grad" || n == "attn_x_grad" || n == "attn-x-grad")
    return Method::attn_x_grad;
  throw Error(ErrorCode::config, "unknown method '" + std::string(name) + "'");
}

Severity parse_severity(std::string_view name) {
  const auto n = lower(name);
  if (n == "minor") return Severity::minor;
  if (n == "major") return Severity::major;
  if (n == "critical") return Severity::critical;
  throw Error(ErrorCode::schema, "unknown severity '" + std::string(name) + "'");
}

}  // namespace mlens
