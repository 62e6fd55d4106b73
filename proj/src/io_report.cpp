// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "io.hpp"

namespace mlens {

namespace {

using json = nlohmann::ordered_json;

std::string fixed(std::optional<double> v, int digits) {
  if (!v) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
  return buf;
}

bool avg_row(const EvalReport& r) { return r.lang_pair == kAverageLangPair; }

auto sort_key(const EvalReport& r) {
  return std::make_tuple(avg_row(r), r.lang_pair, r.method, r.input_config, r.category);
}

std::vector<EvalReport> ordered(std::span<const EvalReport> reports) {
  std::vector<EvalReport> out(reports.begin(), reports.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const EvalReport& a, const EvalReport& b) { return sort_key(a) < sort_key(b); });
  return out;
}

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string render_json(const std::vector<EvalReport>& rows) {
  json list = json::array();
  for (const auto& r : rows) {
    json j;
    j["lang_pair"] = r.lang_pair;
    j["method"] = r.method;
    j["input_config"] = r.input_config;
    j["category"] = r.category;
    j["auc"] = r.auc ? json(*r.auc) : json(nullptr);
    j["recall_at_k"] = r.recall_at_k ? json(*r.recall_at_k) : json(nullptr);
    j["n_sentences_auc"] = r.n_sentences_auc;
    j["n_sentences_rk"] = r.n_sentences_rk;
    list.push_back(std::move(j));
  }
  json doc;
  doc["reports"] = std::move(list);
  return doc.dump(2) + "\n";
}

std::string render_tsv(const std::vector<EvalReport>& rows) {
  std::ostringstream os;
  os << "lang_pair\tmethod\tinput_config\tcategory\tauc\trecall_at_k\tn_sentences_auc\t"
        "n_sentences_rk\n";
  for (const auto& r : rows)
    os << r.lang_pair << '\t' << r.method << '\t' << r.input_config << '\t' << r.category << '\t'
       << fixed(r.auc, 6) << '\t' << fixed(r.recall_at_k, 6) << '\t' << r.n_sentences_auc << '\t'
       << r.n_sentences_rk << '\n';
  return os.str();
}

// Method rows, language-pair columns plus "Avg."; each cell is "AUC / R@K".
std::string render_markdown(const std::vector<EvalReport>& rows) {
  using RowKey = std::tuple<std::string, std::string, std::string>;
  std::set<std::string> pairs;
  std::map<RowKey, std::map<std::string, const EvalReport*>> grid;
  for (const auto& r : rows) {
    if (!avg_row(r)) pairs.insert(r.lang_pair);
    grid[{r.method, r.input_config, r.category}][r.lang_pair] = &r;
  }
  std::ostringstream os;
  os << "| method | inputs | category |";
  for (const auto& lp : pairs) os << ' ' << lp << " |";
  os << ' ' << kAverageLangPair << " |\n|---|---|---|";
  for (std::size_t i = 0; i <= pairs.size(); ++i) os << "---|";
  os << '\n';
  auto cell = [](std::optional<double> auc, std::optional<double> rk) {
    return fixed(auc, 3) + " / " + fixed(rk, 3);
  };
  for (const auto& [key, cells] : grid) {
    const auto& [method, inputs, category] = key;
    os << "| " << method << " | " << inputs << " | " << category << " |";
    double auc_sum = 0, rk_sum = 0;
    std::size_t auc_n = 0, rk_n = 0;
    for (const auto& lp : pairs) {
      auto it = cells.find(lp);
      if (it == cells.end()) {
        os << " - |";
        continue;
      }
      const EvalReport& r = *it->second;
      os << ' ' << cell(r.auc, r.recall_at_k) << " |";
      if (r.auc) auc_sum += *r.auc, ++auc_n;
      if (r.recall_at_k) rk_sum += *r.recall_at_k, ++rk_n;
    }
    if (auto it = cells.find(kAverageLangPair); it != cells.end()) {
      os << ' ' << cell(it->second->auc, it->second->recall_at_k) << " |\n";
    } else {
      std::optional<double> a, k;
      if (auc_n) a = auc_sum / static_cast<double>(auc_n);
      if (rk_n) k = rk_sum / static_cast<double>(rk_n);
      os << ' ' << cell(a, k) << " |\n";
    }
  }
  return os.str();
}

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::json;
  if (name == "tsv") return ReportFormat::tsv;
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  throw Error(ErrorCode::config, "unknown report format '" + std::string(name) + "'");
}

std::string render_report(std::span<const EvalReport> reports, ReportFormat format) {
  const auto rows = ordered(reports);
  switch (format) {
    case ReportFormat::json: return render_json(rows);
    case ReportFormat::tsv: return render_tsv(rows);
    case ReportFormat::markdown: return render_markdown(rows);
  }
  throw Error(ErrorCode::internal, "unhandled report format");
}

std::string render_saliency_html(const EvaluationInstance& instance,
                                 const Explanation& explanation) {
  const Sentence& mt = instance.translation;
  const auto& scores = explanation.subword_scores;
  if (scores.size() != mt.subwords.size())
    throw Error(ErrorCode::shape, "explanation does not match the translation's subwords");
  const WordLabels gold = label_words(mt, instance.gold_spans);

  double lo = 0, hi = 0;
  if (!scores.empty()) {
    lo = *std::min_element(scores.begin(), scores.end());
    hi = *std::max_element(scores.begin(), scores.end());
  }

  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>"
     << html_escape(instance.id) << "</title>\n<style>\n"
     << "body{font-family:sans-serif;line-height:2.2em;margin:2em}\n"
     << ".tok{padding:2px 1px;border-radius:2px}\n"
     << ".gold{border-bottom:5px solid #b0b0b0;padding-bottom:1px}\n"
     << "</style></head><body>\n"
     << "<p>" << html_escape(instance.id) << " &middot; " << to_string(explanation.method)
     << " &middot; " << to_string(explanation.input_config) << "</p>\n<p>";
  for (std::size_t w = 0; w < mt.words.size(); ++w) {
    if (w > 0) os << ' ';
    const bool is_gold = gold.labels[w] == 1;
    os << "<span class=\"" << (is_gold ? "word gold" : "word") << "\">";
    for (std::size_t s = 0; s < mt.subwords.size(); ++s) {
      if (mt.subwords[s].word_index != w) continue;
      const double t = hi > lo ? (scores[s] - lo) / (hi - lo) : 0.0;
      char alpha[16];
      std::snprintf(alpha, sizeof alpha, "%.3f", t);
      os << "<span class=\"tok\" data-score=\"" << fixed(scores[s], 6)
         << "\" style=\"background:rgba(214,39,40," << alpha << ")\">"
         << html_escape(mt.subwords[s].text) << "</span>";
    }
    os << "</span>";
  }
  os << "</p>\n</body></html>\n";
  return os.str();
}

}  // namespace mlens
