// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "io.hpp"

namespace mlens {

namespace {

constexpr std::string_view kOpen = "<v>";
constexpr std::string_view kClose = "</v>";

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab == std::string_view::npos ? line.npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

struct Pending {
  std::size_t first_line = 0;
  std::string id, lang_pair, source, target, reference;
  std::vector<ErrorSpan> spans;
  std::map<std::string, std::string> metadata;
  std::vector<std::string> raters;
};

}  // namespace

MarkedText strip_span_markers(std::string_view marked) {
  MarkedText out;
  std::size_t open_at = 0;
  bool open = false;
  std::size_t i = 0;
  while (i < marked.size()) {
    if (marked.substr(i, kOpen.size()) == kOpen) {
      if (open) throw Error(ErrorCode::parse, "nested <v> marker");
      open = true;
      open_at = out.text.size();
      i += kOpen.size();
    } else if (marked.substr(i, kClose.size()) == kClose) {
      if (!open) throw Error(ErrorCode::parse, "</v> without matching <v>");
      open = false;
      out.spans.emplace_back(open_at, out.text.size());
      i += kClose.size();
    } else {
      out.text.push_back(marked[i++]);
    }
  }
  if (open) throw Error(ErrorCode::parse, "unclosed <v> marker");
  return out;
}

std::vector<EvaluationInstance> parse_mqm_tsv(const std::filesystem::path& path,
                                              const MqmOptions& options) {
  return parse_mqm_tsv_string(read_file(path), options, path.string());
}

std::vector<EvaluationInstance> parse_mqm_tsv_string(std::string_view content,
                                                     const MqmOptions& options,
                                                     const std::string& source_name) {
  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start <= content.size()) {
      std::size_t nl = content.find('\n', start);
      if (nl == std::string_view::npos) nl = content.size();
      std::string line(content.substr(start, nl - start));
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(std::move(line));
      start = nl + 1;
    }
  }
  auto fail = [&](ErrorCode code, std::size_t lineno, const std::string& msg) -> Error {
    return Error(code, source_name + ":" + std::to_string(lineno) + ": " + msg, lineno);
  };
  if (lines.empty() || lines.front().empty())
    throw fail(ErrorCode::schema, 1, "missing header row");

  std::map<std::string, std::size_t> col;
  {
    const auto header = split_tabs(lines.front());
    for (std::size_t i = 0; i < header.size(); ++i) {
      std::string name = lower(header[i]);
      if (name == "lp") name = "lang_pair";
      col.emplace(name, i);
    }
  }
  for (const char* req : {"system", "seg_id", "rater", "severity", "category", "source", "target"})
    if (!col.count(req))
      throw fail(ErrorCode::schema, 1, std::string("missing required column '") + req + "'");
  auto opt = [&](const std::vector<std::string>& row, const char* name) -> std::string {
    auto it = col.find(name);
    return it != col.end() && it->second < row.size() ? row[it->second] : std::string();
  };

  std::vector<Pending> pending;
  std::map<std::string, std::size_t> by_key;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const std::size_t lineno = n + 1;
    if (lines[n].empty()) continue;
    const auto row = split_tabs(lines[n]);
    if (row.size() < col.size())
      throw fail(ErrorCode::schema, lineno,
                 "row has " + std::to_string(row.size()) + " columns, header has " +
                     std::to_string(col.size()));
    const std::string system = opt(row, "system"), doc = opt(row, "doc"),
                      seg = opt(row, "seg_id"), rater = opt(row, "rater");

    MarkedText target, source;
    try {
      target = strip_span_markers(opt(row, "target"));
      source = strip_span_markers(opt(row, "source"));
    } catch (const Error& e) {
      throw fail(ErrorCode::parse, lineno, e.what());
    }

    std::string id = opt(row, "id");
    if (id.empty()) id = system + ":" + (doc.empty() ? "" : doc + ":") + seg;
    const std::string key = id + (options.per_rater ? "\x1f" + rater : "");
    if (options.per_rater && !rater.empty()) id += ":" + rater;

    auto [it, fresh] = by_key.emplace(key, pending.size());
    if (fresh) {
      Pending p;
      p.first_line = lineno;
      p.id = id;
      p.lang_pair = opt(row, "lang_pair");
      if (p.lang_pair.empty()) p.lang_pair = options.default_lang_pair;
      p.source = source.text;
      p.target = target.text;
      p.reference = opt(row, "reference");
      p.metadata["system"] = system;
      if (!doc.empty()) p.metadata["doc"] = doc;
      p.metadata["seg_id"] = seg;
      pending.push_back(std::move(p));
    }
    Pending& p = pending[it->second];
    if (p.target != target.text)
      throw fail(ErrorCode::schema, lineno,
                 "target text differs from line " + std::to_string(p.first_line) +
                     " for the same segment");
    if (!rater.empty() && std::find(p.raters.begin(), p.raters.end(), rater) == p.raters.end())
      p.raters.push_back(rater);

    const std::string sev = lower(opt(row, "severity"));
    if (sev == "no-error" || sev == "no error" || sev == "neutral" || sev.empty()) continue;
    Severity severity;
    try {
      severity = parse_severity(sev);
    } catch (const Error& e) {
      throw fail(ErrorCode::schema, lineno, e.what());
    }
    for (const auto& [a, b] : target.spans) {
      if (a == b) continue;
      const bool dup = std::any_of(p.spans.begin(), p.spans.end(), [&](const ErrorSpan& s) {
        return s.char_start == a && s.char_end == b;
      });
      if (!dup) p.spans.push_back({a, b, severity, opt(row, "category")});
    }
  }

  std::vector<EvaluationInstance> out;
  out.reserve(pending.size());
  for (auto& p : pending) {
    EvaluationInstance inst;
    inst.id = p.id;
    inst.lang_pair = p.lang_pair;
    try {
      inst.translation = tokenize(p.target);
      inst.source = tokenize(p.source);
      if (p.reference.find_first_not_of(" \t") != std::string::npos)
        inst.reference = tokenize(p.reference);
    } catch (const Error& e) {
      throw fail(ErrorCode::parse, p.first_line, e.what());
    }
    std::sort(p.spans.begin(), p.spans.end(), [](const ErrorSpan& a, const ErrorSpan& b) {
      return std::tie(a.char_start, a.char_end) < std::tie(b.char_start, b.char_end);
    });
    inst.gold_spans = std::move(p.spans);
    inst.metadata = std::move(p.metadata);
    std::string raters;
    for (const auto& r : p.raters) raters += (raters.empty() ? "" : ",") + r;
    if (!raters.empty()) inst.metadata["raters"] = raters;
    out.push_back(std::move(inst));
  }
  return out;
}

std::string format_mqm_tsv(std::span<const EvaluationInstance> instances) {
  auto clean = [](const std::string& s) -> const std::string& {
    if (s.find_first_of("\t\n\r") != std::string::npos)
      throw Error(ErrorCode::schema, "text contains a tab or newline and cannot be written as TSV");
    return s;
  };
  auto meta = [](const EvaluationInstance& inst, const char* key) {
    auto it = inst.metadata.find(key);
    return it == inst.metadata.end() ? std::string() : it->second;
  };
  std::ostringstream os;
  os << "id\tsystem\tdoc\tseg_id\trater\tlang_pair\tseverity\tcategory\tsource\ttarget\treference\n";
  for (const auto& inst : instances) {
    const std::string ref = inst.reference ? clean(inst.reference->text) : std::string();
    auto row = [&](const char* severity, const std::string& category, const std::string& target) {
      os << clean(inst.id) << '\t' << meta(inst, "system") << '\t' << meta(inst, "doc") << '\t'
         << meta(inst, "seg_id") << '\t' << meta(inst, "raters") << '\t' << inst.lang_pair << '\t'
         << severity << '\t' << category << '\t' << clean(inst.source.text) << '\t' << target
         << '\t' << ref << '\n';
    };
    const std::string& mt = clean(inst.translation.text);
    if (inst.gold_spans.empty()) {
      row("No-error", "No-error", mt);
      continue;
    }
    for (const auto& span : inst.gold_spans) {
      if (span.char_start >= span.char_end || span.char_end > mt.size())
        throw Error(ErrorCode::span, "span outside translation of '" + inst.id + "'");
      const std::string marked = mt.substr(0, span.char_start) + std::string(kOpen) +
                                 mt.substr(span.char_start, span.char_end - span.char_start) +
                                 std::string(kClose) + mt.substr(span.char_end);
      row(to_string(span.severity), span.category, marked);
    }
  }
  return os.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::io, "short write to " + path.string());
}

}  // namespace mlens
