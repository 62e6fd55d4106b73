// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#include "corruption.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>

#include "rng.hpp"

namespace mlens {

const char* to_string(CorruptionCategory category) {
  switch (category) {
    case CorruptionCategory::neg: return "NEG";
    case CorruptionCategory::hall: return "HALL";
    case CorruptionCategory::ne: return "NE";
    case CorruptionCategory::num: return "NUM";
  }
  return "?";
}

CorruptionCategory parse_corruption_category(std::string_view name) {
  std::string n(name);
  std::transform(n.begin(), n.end(), n.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (n == "NEG") return CorruptionCategory::neg;
  if (n == "HALL") return CorruptionCategory::hall;
  if (n == "NE") return CorruptionCategory::ne;
  if (n == "NUM") return CorruptionCategory::num;
  throw Error(ErrorCode::config, "unknown corruption category '" + std::string(name) + "'");
}

bool eligible(const EvaluationInstance& instance) {
  if (!instance.gold_spans.empty()) return false;
  return !instance.reference || instance.reference->text != instance.translation.text;
}

namespace {

constexpr std::string_view kLeadingPunct = "\"'([{";
constexpr std::string_view kTrailingPunct = ".,;:!?\"')]}";

// Byte range of a word with surrounding ASCII punctuation removed.
struct Core {
  std::size_t start = 0;
  std::size_t end = 0;
};

Core core_of(const Word& w) {
  Core c{w.char_start, w.char_end};
  const std::string& t = w.text;
  std::size_t a = 0, b = t.size();
  while (a < b && kLeadingPunct.find(t[a]) != std::string_view::npos) ++a;
  while (b > a && kTrailingPunct.find(t[b - 1]) != std::string_view::npos) --b;
  c.start += a;
  c.end = w.char_start + b;
  return c;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Xoshiro256 stream_for(const EvaluationInstance& inst, const CorruptionSpec& spec) {
  std::uint64_t x = spec.seed ^ fnv1a64(inst.id) ^ (fnv1a64(to_string(spec.category)) << 1);
  return Xoshiro256(splitmix64(x));
}

void require_eligible(const EvaluationInstance& inst) {
  if (!eligible(inst))
    throw Error(ErrorCode::no_corruption_site,
                "instance '" + inst.id + "' is not eligible for corruption");
}

Corruption finish(const EvaluationInstance& original, const CorruptionSpec& spec,
                  std::string new_text, std::size_t span_start, std::size_t span_end) {
  Corruption c;
  c.instance = original;
  c.instance.translation = tokenize(new_text);
  c.instance.id = original.id + "/" + to_string(spec.category);
  c.instance.metadata["origin"] = original.id;
  c.instance.metadata["category"] = to_string(spec.category);
  c.span = ErrorSpan{span_start, span_end, Severity::critical, to_string(spec.category)};
  c.instance.gold_spans = {c.span};
  return c;
}

std::string splice(const std::string& text, std::size_t start, std::size_t end,
                   std::string_view replacement) {
  return text.substr(0, start) + std::string(replacement) + text.substr(end);
}

bool is_number(std::string_view s) {
  if (s.empty() || !std::isdigit(static_cast<unsigned char>(s.front())) ||
      !std::isdigit(static_cast<unsigned char>(s.back())))
    return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) continue;
    if ((c == ',' || c == '.') && std::isdigit(static_cast<unsigned char>(s[i + 1]))) continue;
    return false;
  }
  return true;
}

std::string replacement_number(std::string_view original, Xoshiro256& rng) {
  const bool pure = std::all_of(original.begin(), original.end(),
                                [](unsigned char c) { return std::isdigit(c); });
  const bool nonzero = original.find_first_not_of("0,.") != std::string_view::npos;
  enum Kind { same_width, times_ten, year };
  std::vector<Kind> kinds{same_width, year};
  if (pure && nonzero) kinds.push_back(times_ten);

  for (int attempt = 0; attempt < 32; ++attempt) {
    std::string out;
    switch (kinds[rng.below(kinds.size())]) {
      case same_width:
        out = std::string(original);
        for (std::size_t i = 0; i < out.size(); ++i) {
          if (!std::isdigit(static_cast<unsigned char>(out[i]))) continue;
          const bool leading = i == 0 && out.size() > 1;
          out[i] = static_cast<char>('0' + (leading ? 1 + rng.below(9) : rng.below(10)));
        }
        break;
      case times_ten:
        out = std::string(original) + "0";
        break;
      case year:
        out = std::to_string(1950 + rng.below(81));
        break;
    }
    if (out != original) return out;
  }
  return std::string(original) + "0";  // unreachable for any digit string in practice
}

constexpr std::array<std::string_view, 12> kAuxiliaries{
    "is", "are", "was", "were", "will", "can", "could", "should", "does", "did", "has", "have"};

}  // namespace

Corruption corrupt_number(const EvaluationInstance& inst, const CorruptionSpec& spec) {
  require_eligible(inst);
  const auto& s = inst.translation;
  std::vector<Core> sites;
  for (const auto& w : s.words) {
    const Core c = core_of(w);
    if (is_number(std::string_view(s.text).substr(c.start, c.end - c.start))) sites.push_back(c);
  }
  if (sites.empty())
    throw Error(ErrorCode::no_corruption_site, "no numeric word in '" + s.text + "'");
  auto rng = stream_for(inst, spec);
  const Core site = sites[rng.below(sites.size())];
  const std::string repl =
      replacement_number(std::string_view(s.text).substr(site.start, site.end - site.start), rng);
  return finish(inst, spec, splice(s.text, site.start, site.end, repl), site.start,
                site.start + repl.size());
}

Corruption corrupt_negation(const EvaluationInstance& inst, const CorruptionSpec& spec) {
  require_eligible(inst);
  const auto& s = inst.translation;
  const auto& words = s.words;

  // (a) remove an existing negation.
  for (std::size_t i = 0; i < words.size(); ++i) {
    const Core c = core_of(words[i]);
    const std::string core = s.text.substr(c.start, c.end - c.start);
    const std::string lc = lower(core);
    if (lc == "not" && words.size() > 1) {
      std::string text;
      if (i > 0 && c.start == words[i].char_start) {
        text = s.text.substr(0, words[i - 1].char_end) + s.text.substr(c.end);
      } else {
        std::size_t end = c.end;
        if (c.end == words[i].char_end && i + 1 < words.size()) end = words[i + 1].char_start;
        text = s.text.substr(0, c.start) + s.text.substr(end);
      }
      const Sentence t = tokenize(text);
      // The window spans the neighbours of the deletion point.
      const std::size_t first = i > 0 ? i - 1 : 0;
      const std::size_t last = std::min(i, t.words.size() - 1);
      return finish(inst, spec, text, t.words[first].char_start, t.words[last].char_end);
    }
    if (lc.size() > 3 && lc.ends_with("n't")) {
      std::string base;
      if (lc == "can't") base = core.substr(0, 3);
      else if (lc == "won't") base = std::string(1, core[0] == 'W' ? 'W' : 'w') + "ill";
      else if (lc == "shan't") base = core.substr(0, 4) + "ll";
      else base = core.substr(0, core.size() - 3);
      return finish(inst, spec, splice(s.text, c.start, c.end, base), c.start,
                    c.start + base.size());
    }
  }

  // (b) insert "not" after the first auxiliary or copula.
  for (const auto& w : words) {
    if (std::find(kAuxiliaries.begin(), kAuxiliaries.end(), lower(w.text)) ==
        kAuxiliaries.end())
      continue;
    const std::string text = splice(s.text, w.char_end, w.char_end, " not");
    return finish(inst, spec, text, w.char_end + 1, w.char_end + 4);
  }
  throw Error(ErrorCode::no_corruption_site, "no negation site in '" + s.text + "'");
}

Corruption corrupt_named_entity(const EvaluationInstance& inst, const CorruptionSpec& spec) {
  require_eligible(inst);
  const auto& s = inst.translation;
  std::map<std::string, std::vector<std::string>> by_type;
  std::map<std::string, std::string> type_of;
  for (const auto& e : spec.entity_lexicon) {
    auto& surfaces = by_type[e.type];
    if (std::find(surfaces.begin(), surfaces.end(), e.surface) == surfaces.end())
      surfaces.push_back(e.surface);
    type_of.emplace(e.surface, e.type);
  }
  for (const auto& w : s.words) {
    const Core c = core_of(w);
    auto it = type_of.find(s.text.substr(c.start, c.end - c.start));
    if (it == type_of.end()) continue;
    const auto& surfaces = by_type[it->second];
    if (surfaces.size() < 2) continue;
    std::vector<std::string> others;
    for (const auto& x : surfaces)
      if (x != it->first) others.push_back(x);
    auto rng = stream_for(inst, spec);
    const std::string& repl = others[rng.below(others.size())];
    return finish(inst, spec, splice(s.text, c.start, c.end, repl), c.start,
                  c.start + repl.size());
  }
  throw Error(ErrorCode::no_corruption_site,
              "no replaceable lexicon entity in '" + s.text + "'");
}

Corruption corrupt_hallucination(const EvaluationInstance& inst, const CorruptionSpec& spec) {
  require_eligible(inst);
  std::vector<std::vector<std::string>> donors;
  for (const auto& line : spec.donor_corpus) {
    std::vector<std::string> words;
    try {
      for (const auto& w : tokenize(line).words) {
        const Core c = core_of(w);
        if (c.end > c.start) words.push_back(line.substr(c.start, c.end - c.start));
      }
    } catch (const Error&) {
      continue;
    }
    if (words.size() >= 3) donors.push_back(std::move(words));
  }
  if (donors.empty())
    throw Error(ErrorCode::insufficient_donor, "no donor sentence has at least 3 words");

  auto rng = stream_for(inst, spec);
  const auto& donor = donors[rng.below(donors.size())];
  const std::size_t max_len = std::min<std::size_t>(8, donor.size());
  const std::size_t n = 3 + rng.below(max_len - 3 + 1);
  const std::size_t from = rng.below(donor.size() - n + 1);
  std::string phrase;
  for (std::size_t i = from; i < from + n; ++i) phrase += (i > from ? " " : "") + donor[i];

  const auto& words = inst.translation.words;
  const auto& text = inst.translation.text;
  const std::size_t W = words.size();
  const std::size_t boundary = W >= 2 ? 1 + rng.below(W - 1) : 1;
  if (boundary < W) {
    const std::size_t at = words[boundary].char_start;
    return finish(inst, spec, splice(text, at, at, phrase + " "), at, at + phrase.size());
  }
  const std::size_t at = words.back().char_end;
  return finish(inst, spec, splice(text, at, at, " " + phrase), at + 1, at + 1 + phrase.size());
}

Corruption corrupt(const EvaluationInstance& instance, const CorruptionSpec& spec) {
  switch (spec.category) {
    case CorruptionCategory::neg: return corrupt_negation(instance, spec);
    case CorruptionCategory::hall: return corrupt_hallucination(instance, spec);
    case CorruptionCategory::ne: return corrupt_named_entity(instance, spec);
    case CorruptionCategory::num: return corrupt_number(instance, spec);
  }
  throw Error(ErrorCode::internal, "unhandled corruption category");
}

CorruptionSet build_corruption_set(
    std::span<const EvaluationInstance> corpus, std::span<const CorruptionSpec> specs,
    const std::map<CorruptionCategory, std::size_t>& per_category_target) {
  CorruptionSet out;
  out.manifest.corpus_size = corpus.size();
  for (const auto& inst : corpus) out.manifest.eligible_instances += eligible(inst);

  for (const auto& spec : specs) {
    CategoryManifest m{spec.category, std::nullopt, 0, {}};
    if (auto it = per_category_target.find(spec.category); it != per_category_target.end())
      m.target = it->second;
    for (const auto& inst : corpus) {
      if (m.target && m.emitted >= *m.target) break;
      if (!inst.gold_spans.empty()) {
        ++m.skipped["has_gold_spans"];
        continue;
      }
      if (!eligible(inst)) {
        ++m.skipped["copy_of_reference"];
        continue;
      }
      try {
        out.instances.push_back(corrupt(inst, spec).instance);
        ++m.emitted;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::no_corruption_site) ++m.skipped["no_corruption_site"];
        else if (e.code() == ErrorCode::insufficient_donor) ++m.skipped["insufficient_donor"];
        else throw;
      }
    }
    if (m.target && m.emitted < *m.target)
      out.manifest.notes.push_back(std::string(to_string(spec.category)) + ": emitted " +
                                   std::to_string(m.emitted) + " of target " +
                                   std::to_string(*m.target) + " (corpus exhausted)");
    out.manifest.categories.push_back(std::move(m));
  }
  if (out.manifest.eligible_instances == 0)
    out.manifest.notes.push_back(
        "no eligible instances: every translation carries gold spans or copies its reference");
  return out;
}

std::vector<EntityEntry> load_entity_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open entity lexicon " + path.string());
  std::vector<EntityEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
      throw Error(ErrorCode::parse,
                  path.string() + ":" + std::to_string(lineno) + ": expected type<TAB>surface",
                  lineno);
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

std::vector<std::string> load_donor_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open donor corpus " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) out.push_back(line);
  }
  return out;
}

}  // namespace mlens
