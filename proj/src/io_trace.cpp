// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "io.hpp"

namespace mlens {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct TensorSlot {
  const char* name;
  Tensor ModelTrace::*member;
};

constexpr TensorSlot kSlots[] = {
    {"embeddings", &ModelTrace::embeddings},
    {"input_embedding_grads", &ModelTrace::input_embedding_grads},
    {"attention", &ModelTrace::attention},
    {"value_grads", &ModelTrace::value_grads},
};

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

void write_f32(const fs::path& path, const std::vector<double>& data) {
  std::vector<std::uint32_t> raw(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float f = static_cast<float>(data[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    raw[i] = to_le(bits);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * 4));
  if (!out) throw Error(ErrorCode::io, "short write to " + path.string());
}

std::vector<double> read_f32(const fs::path& path, std::size_t expected, const char* name) {
  std::error_code ec;
  const auto bytes = fs::file_size(path, ec);
  if (ec) throw Error(ErrorCode::trace_format, std::string(name) + ": missing file " + path.string());
  if (bytes != expected * 4)
    throw Error(ErrorCode::trace_format,
                std::string(name) + ": shape declares " + std::to_string(expected) +
                    " floats, file holds " + std::to_string(bytes / 4) +
                    (bytes % 4 ? " (plus a partial value)" : ""));
  std::vector<std::uint32_t> raw(expected);
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected * 4));
  if (!in) throw Error(ErrorCode::trace_format, std::string(name) + ": short read");
  std::vector<double> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    const std::uint32_t bits = to_le(raw[i]);
    float f;
    std::memcpy(&f, &bits, 4);
    out[i] = f;
  }
  return out;
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key))
    throw Error(ErrorCode::trace_format, std::string("manifest lacks '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::trace_format, std::string("manifest field '") + key + "': " + e.what());
  }
}

}  // namespace

void write_trace(const ModelTrace& trace, const fs::path& dir) {
  fs::create_directories(dir);
  json m;
  m["format_version"] = kTraceFormatVersion;
  m["producer"] = trace.producer;
  m["architecture"] = to_string(trace.architecture);
  m["input_config"] = to_string(trace.input_config);
  m["score"] = trace.score;
  m["seq_len"] = trace.seq();
  m["layers"] = trace.layers;
  m["heads"] = trace.heads;
  m["d_model"] = trace.d_model;
  m["d_head"] = trace.d_head;
  m["tokenizer"] = trace.tokenizer;
  m["embedding_layer_note"] = trace.embedding_layer_note;
  json layout = json::array();
  for (const auto& e : trace.layout)
    layout.push_back({{"tag", to_string(e.tag)},
                      {"word_index", e.word_index},
                      {"position", e.position},
                      {"text", e.text}});
  m["layout"] = std::move(layout);
  json tensors = json::array();
  for (const auto& slot : kSlots) {
    const Tensor& t = trace.*slot.member;
    const std::string file = std::string(slot.name) + ".f32";
    write_f32(dir / file, t.data);
    tensors.push_back(
        {{"name", slot.name}, {"shape", t.shape}, {"dtype", "float32"}, {"path", file}});
  }
  m["tensors"] = std::move(tensors);
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

ModelTrace read_trace(const fs::path& dir) {
  json m;
  try {
    m = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::trace_format, "manifest.json: " + std::string(e.what()));
  } catch (const Error& e) {
    throw Error(ErrorCode::trace_format, e.what());
  }
  const int version = field<int>(m, "format_version");
  if (version != kTraceFormatVersion)
    throw Error(ErrorCode::trace_format, "unsupported trace format version " + std::to_string(version));

  ModelTrace t;
  try {
    t.architecture = parse_architecture(field<std::string>(m, "architecture"));
    t.input_config = parse_input_config(field<std::string>(m, "input_config"));
  } catch (const Error& e) {
    throw Error(ErrorCode::trace_format, e.what());
  }
  t.score = field<double>(m, "score");
  t.layers = field<std::size_t>(m, "layers");
  t.heads = field<std::size_t>(m, "heads");
  t.d_model = field<std::size_t>(m, "d_model");
  t.d_head = field<std::size_t>(m, "d_head");
  t.producer = m.value("producer", "");
  t.tokenizer = m.value("tokenizer", "");
  t.embedding_layer_note = m.value("embedding_layer_note", "");
  for (const auto& e : field<json>(m, "layout")) {
    LayoutEntry le;
    le.tag = parse_segment_tag(field<std::string>(e, "tag"));
    le.word_index = field<long>(e, "word_index");
    le.position = e.value("position", std::size_t{0});
    le.text = e.value("text", "");
    t.layout.push_back(std::move(le));
  }
  const std::size_t S = field<std::size_t>(m, "seq_len");
  if (S != t.layout.size())
    throw Error(ErrorCode::trace_format, "seq_len " + std::to_string(S) + " but layout has " +
                                             std::to_string(t.layout.size()) + " entries");

  const std::vector<std::vector<std::size_t>> expected_shapes{
      {S, t.d_model}, {S, t.d_model}, {t.layers, t.heads, S, S}, {t.layers, t.heads, S, t.d_head}};
  const json tensors = field<json>(m, "tensors");
  for (std::size_t k = 0; k < std::size(kSlots); ++k) {
    const auto& slot = kSlots[k];
    const json* desc = nullptr;
    for (const auto& d : tensors)
      if (d.value("name", "") == slot.name) desc = &d;
    if (desc == nullptr)
      throw Error(ErrorCode::trace_format, std::string("manifest lacks tensor '") + slot.name + "'");
    const auto shape = field<std::vector<std::size_t>>(*desc, "shape");
    if (desc->value("dtype", "float32") != "float32")
      throw Error(ErrorCode::trace_format, std::string(slot.name) + ": only float32 is supported");
    if (shape != expected_shapes[k])
      throw Error(ErrorCode::trace_format,
                  std::string(slot.name) + ": declared shape disagrees with header counts");
    Tensor& out = t.*slot.member;
    out.shape = shape;
    out.data = read_f32(dir / field<std::string>(*desc, "path"), shape_product(shape), slot.name);
  }
  return t;
}

void write_trace_index(std::span<const TraceIndexEntry> entries, const fs::path& dir) {
  json j;
  j["format_version"] = kTraceFormatVersion;
  json list = json::array();
  for (const auto& e : entries)
    list.push_back({{"instance_id", e.instance_id},
                    {"input_config", to_string(e.input_config)},
                    {"path", e.path}});
  j["traces"] = std::move(list);
  write_file(dir / "index.json", j.dump(2) + "\n");
}

std::vector<TraceIndexEntry> read_trace_index(const fs::path& dir) {
  json j;
  try {
    j = json::parse(read_file(dir / "index.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::trace_format, "index.json: " + std::string(e.what()));
  } catch (const Error& e) {
    throw Error(ErrorCode::trace_format, e.what());
  }
  std::vector<TraceIndexEntry> out;
  for (const auto& e : field<json>(j, "traces")) {
    TraceIndexEntry entry;
    entry.instance_id = field<std::string>(e, "instance_id");
    try {
      entry.input_config = parse_input_config(field<std::string>(e, "input_config"));
    } catch (const Error& err) {
      throw Error(ErrorCode::trace_format, err.what());
    }
    entry.path = field<std::string>(e, "path");
    out.push_back(std::move(entry));
  }
  return out;
}

std::string format_head_rankings(std::span<const RankingRecord> records) {
  json j;
  j["format_version"] = 1;
  json list = json::array();
  for (const auto& r : records) {
    json heads = json::array();
    for (const auto& [id, auc] : r.ranking.head_auc)
      heads.push_back({{"layer", id.layer}, {"head", id.head}, {"auc", auc}});
    json selected = json::array();
    for (const auto& id : r.ranking.selected) selected.push_back({id.layer, id.head});
    list.push_back({{"method", to_string(r.method)},
                    {"input_config", to_string(r.input_config)},
                    {"k", r.ranking.selected.size()},
                    {"heads", std::move(heads)},
                    {"selected", std::move(selected)}});
  }
  j["rankings"] = std::move(list);
  return j.dump(2) + "\n";
}

std::vector<RankingRecord> parse_head_rankings(std::string_view json_text) {
  std::vector<RankingRecord> out;
  try {
    const json j = json::parse(json_text);
    for (const auto& r : j.at("rankings")) {
      RankingRecord rec;
      rec.method = parse_method(r.at("method").get<std::string>());
      rec.input_config = parse_input_config(r.at("input_config").get<std::string>());
      for (const auto& h : r.at("heads"))
        rec.ranking.head_auc.emplace_back(
            HeadId{h.at("layer").get<std::size_t>(), h.at("head").get<std::size_t>()},
            h.at("auc").get<double>());
      for (const auto& s : r.at("selected"))
        rec.ranking.selected.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
      out.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("head ranking file: ") + e.what());
  }
  return out;
}

}  // namespace mlens
