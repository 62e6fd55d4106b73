// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

namespace mlens {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// --- model config ----------------------------------------------------------

ModelSpec parse_model_config(std::string_view json_text) {
  ModelSpec spec;
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) throw Error(ErrorCode::config, "model config must be a JSON object");
    if (j.contains("architecture"))
      spec.architecture = parse_architecture(j["architecture"].get<std::string>());
    auto& e = spec.encoder;
    e.layers = j.value("layers", e.layers);
    e.heads = j.value("heads", e.heads);
    e.d_model = j.value("d_model", e.d_model);
    e.d_ff = j.value("d_ff", e.d_ff);
    e.vocab_size = j.value("vocab_size", e.vocab_size);
    e.seed = j.value("seed", e.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, std::string("model config: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::config, std::string("model config: ") + e.what());
  }
  check_config(spec.encoder);
  return spec;
}

ModelSpec load_model_config(const fs::path& path) {
  try {
    return parse_model_config(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::io) throw Error(ErrorCode::config, e.what());
    throw;
  }
}

// --- threading -------------------------------------------------------------

std::size_t resolve_threads(std::size_t requested) {
  std::size_t n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("METRIC_LENS_THREADS"); env && *env) {
      char* end = nullptr;
      const unsigned long v = std::strtoul(env, &end, 10);
      if (end && *end == '\0' && v > 0) n = v;
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(resolve_threads(threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// --- shared plumbing -------------------------------------------------------

namespace {

class TraceSource {
 public:
  explicit TraceSource(const RunConfig& config) {
    if (config.model.has_value() == config.traces.has_value())
      throw Error(ErrorCode::config,
                  "exactly one trace source is required: a toy model config or a trace directory");
    if (config.model) {
      ModelSpec spec = *config.model;
      if (config.seed) spec.encoder.seed = *config.seed;
      model_.emplace(init_model(spec.encoder, spec.architecture));
    } else {
      dir_ = *config.traces;
      for (auto& e : read_trace_index(dir_)) {
        const auto key = std::make_pair(e.instance_id, e.input_config);
        if (!index_.emplace(key, e.path).second)
          throw Error(ErrorCode::trace_format, "duplicate index entry for '" + e.instance_id +
                                                   "' (" + to_string(e.input_config) + ")");
      }
    }
  }

  bool from_model() const { return model_.has_value(); }

  ModelTrace get(const EvaluationInstance& inst, InputConfig config) const {
    if (model_) return forward_with_trace(*model_, inst, config).trace;
    if (uses_reference(config) && !inst.reference)
      throw Error(ErrorCode::missing_segment,
                  "instance '" + inst.id + "' has no reference for " + to_string(config));
    auto it = index_.find({inst.id, config});
    if (it == index_.end())
      throw Error(ErrorCode::trace_format, "no trace for instance '" + inst.id + "' (" +
                                               to_string(config) + ")");
    ModelTrace t = read_trace(dir_ / it->second);
    const auto violations = validate_trace(t, inst, config);
    if (!violations.empty())
      throw Error(ErrorCode::trace_format,
                  "trace for '" + inst.id + "' (" + to_string(config) + "): " + violations.front());
    return t;
  }

  const std::map<std::pair<std::string, InputConfig>, std::string>& index() const {
    return index_;
  }
  const fs::path& dir() const { return dir_; }

 private:
  std::optional<MetricModel> model_;
  fs::path dir_;
  std::map<std::pair<std::string, InputConfig>, std::string> index_;
};

bool is_attention_method(Method m) { return m == Method::attention || m == Method::attn_x_grad; }

using RankingTable = std::map<std::pair<Method, InputConfig>, HeadRanking>;

RankingTable load_rankings(const RunConfig& config) {
  RankingTable table;
  if (!config.heads_file) return table;
  for (auto& r : parse_head_rankings(read_file(*config.heads_file))) {
    if (config.top_k == 0) throw Error(ErrorCode::config, "--top-k must be positive");
    const std::size_t available =
        r.ranking.head_auc.empty() ? r.ranking.selected.size() : r.ranking.head_auc.size();
    if (available < config.top_k)
      throw Error(ErrorCode::config, "heads file ranks fewer heads than --top-k");
    HeadRanking ranking;
    if (!r.ranking.head_auc.empty()) {
      for (std::size_t i = 0; i < config.top_k; ++i)
        ranking.selected.push_back(r.ranking.head_auc[i].first);
      ranking.head_auc = r.ranking.head_auc;
    } else {
      ranking.selected.assign(r.ranking.selected.begin(), r.ranking.selected.begin() + config.top_k);
    }
    table[{r.method, r.input_config}] = std::move(ranking);
  }
  return table;
}

// One explanation per requested method, attention methods already ensembled.
std::vector<Explanation> explain_all(const ModelTrace& trace, InputConfig config,
                                     const RunConfig& run, const RankingTable& rankings) {
  std::vector<Explanation> out;
  for (Method m : run.methods) {
    switch (m) {
      case Method::embed_align:
        out.push_back(explain_embed_align(trace, config));
        break;
      case Method::grad_l2:
        out.push_back(explain_grad_l2(trace));
        break;
      case Method::attention:
      case Method::attn_x_grad: {
        const auto per_head = m == Method::attention ? explain_attention(trace, run.reduction)
                                                     : explain_attn_grad(trace);
        auto it = rankings.find({m, config});
        out.push_back(ensemble_heads(
            per_head, it != rankings.end() ? it->second : all_heads(trace.layers, trace.heads)));
        break;
      }
    }
    out.back().input_config = config;
  }
  return out;
}

struct WorkItem {
  std::size_t instance;
  InputConfig config;
};

// Pairs each instance with the requested configs; configs needing a missing
// reference are skipped when `skip_missing` is set.
std::vector<WorkItem> plan(const std::vector<EvaluationInstance>& instances,
                           const std::vector<InputConfig>& configs, bool skip_missing) {
  std::vector<WorkItem> items;
  for (std::size_t i = 0; i < instances.size(); ++i)
    for (InputConfig c : configs) {
      if (skip_missing && uses_reference(c) && !instances[i].reference) continue;
      items.push_back({i, c});
    }
  return items;
}

json scores_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

std::string sanitize(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out;
}

std::string config_dir_name(InputConfig c) {
  switch (c) {
    case InputConfig::src: return "src";
    case InputConfig::ref: return "ref";
    case InputConfig::src_ref: return "src_ref";
  }
  return "unknown";
}

}  // namespace

std::string sentence_category(const EvaluationInstance& instance) {
  if (instance.gold_spans.empty()) return "none";
  const std::string& first = instance.gold_spans.front().category;
  for (const auto& s : instance.gold_spans)
    if (s.category != first) return "mixed";
  return first.empty() ? "uncategorized" : first;
}

std::vector<EvaluationInstance> load_instances(const RunConfig& config) {
  if (config.inputs.empty()) throw Error(ErrorCode::config, "no input TSV given");
  std::vector<EvaluationInstance> all;
  for (const auto& p : config.inputs) {
    auto part = parse_mqm_tsv(p, config.mqm);
    all.insert(all.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return all;
}

// --- explain ---------------------------------------------------------------

std::string cmd_explain(const RunConfig& config) {
  const auto instances = load_instances(config);
  const TraceSource source(config);
  const RankingTable rankings = load_rankings(config);
  const auto items = plan(instances, config.input_configs, false);

  struct Done {
    double score = 0;
    std::vector<Explanation> explanations;
  };
  std::vector<Done> done(items.size());
  parallel_for(items.size(), config.threads, [&](std::size_t k) {
    const auto& inst = instances[items[k].instance];
    const ModelTrace trace = source.get(inst, items[k].config);
    done[k] = {trace.score, explain_all(trace, items[k].config, config, rankings)};
  });

  json list = json::array();
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& inst = instances[items[k].instance];
    json subwords = json::array(), words = json::array();
    for (const auto& s : inst.translation.subwords) subwords.push_back(s.text);
    for (const auto& w : inst.translation.words) words.push_back(w.text);
    json methods = json::array();
    for (const auto& e : done[k].explanations) {
      methods.push_back({{"method", to_string(e.method)},
                         {"subword_scores", scores_json(e.subword_scores)},
                         {"word_scores", scores_json(e.word_scores)}});
      if (config.html_dir)
        write_file(*config.html_dir / (sanitize(inst.id) + "." + config_dir_name(items[k].config) +
                                       "." + to_string(e.method) + ".html"),
                   render_saliency_html(inst, e));
    }
    list.push_back({{"id", inst.id},
                    {"lang_pair", inst.lang_pair},
                    {"input_config", to_string(items[k].config)},
                    {"score", done[k].score},
                    {"subwords", std::move(subwords)},
                    {"words", std::move(words)},
                    {"methods", std::move(methods)}});
  }
  json doc;
  doc["explanations"] = std::move(list);
  return doc.dump(2) + "\n";
}

// --- evaluate --------------------------------------------------------------

std::string cmd_evaluate(const RunConfig& config) {
  const auto instances = load_instances(config);
  const TraceSource source(config);
  const RankingTable rankings = load_rankings(config);
  const auto items = plan(instances, config.input_configs, true);

  std::vector<std::vector<SentenceResult>> per_item(items.size());
  parallel_for(items.size(), config.threads, [&](std::size_t k) {
    const auto& inst = instances[items[k].instance];
    const InputConfig c = items[k].config;
    const WordLabels labels = label_words(inst.translation, inst.gold_spans);
    const std::string category = sentence_category(inst);
    const ModelTrace trace = source.get(inst, c);
    for (const auto& e : explain_all(trace, c, config, rankings))
      per_item[k].push_back(score_sentence(inst.lang_pair, to_string(e.method), to_string(c),
                                           category, error_oriented(e.method, e.word_scores),
                                           labels));
    if (config.include_oracle) {
      std::vector<double> oracle(labels.labels.begin(), labels.labels.end());
      per_item[k].push_back(
          score_sentence(inst.lang_pair, "oracle", to_string(c), category, oracle, labels));
    }
  });

  std::vector<SentenceResult> results;
  for (auto& v : per_item)
    for (auto& r : v) results.push_back(std::move(r));
  auto reports = aggregate(results, config.grouping, config.averaging);
  if (reports.empty())
    throw Error(ErrorCode::no_evaluable,
                "no evaluable sentences: every sentence has all-correct or all-error words");
  if (config.grouping.lang_pair) {
    const auto avg = average_over_lang_pairs(reports);
    reports.insert(reports.end(), avg.begin(), avg.end());
  }
  return render_report(reports, config.format);
}

// --- select-heads ----------------------------------------------------------

std::string cmd_select_heads(const RunConfig& config) {
  const auto instances = load_instances(config);
  const TraceSource source(config);
  std::vector<Method> methods;
  for (Method m : config.methods)
    if (is_attention_method(m)) methods.push_back(m);
  if (methods.empty())
    throw Error(ErrorCode::config, "head selection needs the attention or attn-grad method");

  std::vector<RankingRecord> records;
  for (InputConfig c : config.input_configs) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < instances.size(); ++i)
      if (!uses_reference(c) || instances[i].reference) members.push_back(i);
    std::vector<WordLabels> labels(members.size());
    std::vector<std::map<Method, std::vector<Explanation>>> per_head(members.size());
    parallel_for(members.size(), config.threads, [&](std::size_t k) {
      const auto& inst = instances[members[k]];
      labels[k] = label_words(inst.translation, inst.gold_spans);
      const ModelTrace trace = source.get(inst, c);
      for (Method m : methods)
        per_head[k][m] = m == Method::attention ? explain_attention(trace, config.reduction)
                                                : explain_attn_grad(trace);
    });
    for (Method m : methods) {
      std::vector<std::vector<Explanation>> dev;
      dev.reserve(members.size());
      for (auto& ph : per_head) dev.push_back(std::move(ph[m]));
      if (dev.empty())
        throw Error(ErrorCode::insufficient_dev_data,
                    std::string("no development sentences for ") + to_string(c));
      records.push_back({m, c, select_top_heads(dev, labels, config.top_k)});
    }
  }
  return format_head_rankings(records);
}

// --- corrupt ---------------------------------------------------------------

std::string corruption_manifest_json(const CorruptionManifest& manifest) {
  json j;
  j["corpus_size"] = manifest.corpus_size;
  j["eligible_instances"] = manifest.eligible_instances;
  json cats = json::array();
  for (const auto& c : manifest.categories) {
    json skipped = json::object();
    for (const auto& [reason, n] : c.skipped) skipped[reason] = n;
    cats.push_back({{"category", to_string(c.category)},
                    {"target", c.target ? json(*c.target) : json(nullptr)},
                    {"emitted", c.emitted},
                    {"skipped", std::move(skipped)}});
  }
  j["categories"] = std::move(cats);
  j["notes"] = manifest.notes;
  return j.dump(2) + "\n";
}

std::string cmd_corrupt(const RunConfig& config) {
  const auto corpus = load_instances(config);
  const std::uint64_t seed = config.seed.value_or(0);
  std::vector<EntityEntry> lexicon;
  std::vector<std::string> donors;
  std::vector<CorruptionSpec> specs;
  for (CorruptionCategory c : config.categories) {
    if (c == CorruptionCategory::ne && lexicon.empty()) {
      if (!config.lexicon) throw Error(ErrorCode::config, "NE corruption needs --lexicon");
      lexicon = load_entity_lexicon(*config.lexicon);
    }
    if (c == CorruptionCategory::hall && donors.empty()) {
      if (!config.donors) throw Error(ErrorCode::config, "HALL corruption needs --donors");
      donors = load_donor_corpus(*config.donors);
    }
    CorruptionSpec spec;
    spec.category = c;
    spec.seed = seed;
    if (c == CorruptionCategory::ne) spec.entity_lexicon = lexicon;
    if (c == CorruptionCategory::hall) spec.donor_corpus = donors;
    specs.push_back(std::move(spec));
  }
  std::map<CorruptionCategory, std::size_t> targets;
  if (config.per_category)
    for (CorruptionCategory c : config.categories) targets[c] = *config.per_category;
  const CorruptionSet set = build_corruption_set(corpus, specs, targets);
  if (config.manifest_out) write_file(*config.manifest_out, corruption_manifest_json(set.manifest));
  return format_mqm_tsv(set.instances);
}

// --- export-traces ---------------------------------------------------------

std::string cmd_export_traces(const RunConfig& config) {
  if (!config.model) throw Error(ErrorCode::config, "export-traces needs a toy model config");
  if (!config.out_dir) throw Error(ErrorCode::config, "export-traces needs an output directory");
  const auto instances = load_instances(config);
  const TraceSource source(config);
  const auto items = plan(instances, config.input_configs, true);
  std::vector<TraceIndexEntry> index(items.size());
  parallel_for(items.size(), config.threads, [&](std::size_t k) {
    const auto& inst = instances[items[k].instance];
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "%06zu", items[k].instance);
    const std::string rel = std::string(prefix) + "_" + config_dir_name(items[k].config);
    write_trace(source.get(inst, items[k].config), *config.out_dir / rel);
    index[k] = {inst.id, items[k].config, rel};
  });
  write_trace_index(index, *config.out_dir);
  return read_file(*config.out_dir / "index.json");
}

// --- validate --------------------------------------------------------------

ValidationOutcome cmd_validate(const RunConfig& config) {
  if (!config.traces) throw Error(ErrorCode::config, "validate needs a trace directory");
  const auto instances = load_instances(config);
  std::map<std::string, const EvaluationInstance*> by_id;
  for (const auto& inst : instances) by_id.emplace(inst.id, &inst);
  const auto index = read_trace_index(*config.traces);

  std::vector<std::vector<std::string>> found(index.size());
  parallel_for(index.size(), config.threads, [&](std::size_t k) {
    const auto& e = index[k];
    auto it = by_id.find(e.instance_id);
    if (it == by_id.end()) {
      found[k].push_back("instance not present in the input TSV");
      return;
    }
    try {
      const ModelTrace t = read_trace(*config.traces / e.path);
      found[k] = validate_trace(t, *it->second, e.input_config);
    } catch (const Error& err) {
      found[k].push_back(err.what());
    }
  });

  ValidationOutcome out;
  json list = json::array();
  for (std::size_t k = 0; k < index.size(); ++k) {
    out.violations += found[k].size();
    list.push_back({{"instance_id", index[k].instance_id},
                    {"input_config", to_string(index[k].input_config)},
                    {"path", index[k].path},
                    {"violations", found[k]}});
  }
  json doc;
  doc["traces"] = std::move(list);
  doc["violations"] = out.violations;
  out.document = doc.dump(2) + "\n";
  return out;
}

}  // namespace mlens
