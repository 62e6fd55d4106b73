// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include "helpers.hpp"
#include "pipeline.hpp"

using namespace mlens;
using namespace mlens::testing;
using nlohmann::json;

namespace {

RunConfig fixture_run() {
  RunConfig rc;
  rc.inputs = {data_path("mqm_fixture.tsv")};
  rc.model = load_model_config(data_path("toy_joint.json"));
  rc.threads = 2;
  return rc;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::internal;
}

}  // namespace

TEST_CASE("model configs parse with defaults and reject bad values") {
  const auto spec = load_model_config(data_path("toy_separate.json"));
  CHECK(spec.architecture == Architecture::separate);
  CHECK(spec.encoder.d_model == 16);
  CHECK(spec.encoder.seed == 11);
  CHECK(code_of([] { parse_model_config("{\"d_model\": 15, \"heads\": 2}"); }) == ErrorCode::config);
  CHECK(code_of([] { parse_model_config("{\"architecture\": \"dual\"}"); }) == ErrorCode::config);
  CHECK(code_of([] { parse_model_config("[1]"); }) == ErrorCode::config);
  CHECK(code_of([] { load_model_config("/nonexistent/model.json"); }) == ErrorCode::config);
}

TEST_CASE("explain emits every method for every instance") {
  auto rc = fixture_run();
  rc.input_configs = {InputConfig::src};
  rc.html_dir = scratch_dir("html");
  const auto doc = json::parse(cmd_explain(rc));
  const auto& list = doc["explanations"];
  REQUIRE(list.size() == 5);
  for (const auto& e : list) {
    REQUIRE(e["methods"].size() == 4);
    for (const auto& m : e["methods"]) {
      CHECK(m["subword_scores"].size() == e["subwords"].size());
      CHECK(m["word_scores"].size() == e["words"].size());
    }
  }
  CHECK(list[0]["methods"][0]["method"] == "embed-align");
  CHECK(std::filesystem::exists(*rc.html_dir / "sysA_doc1_1.src.grad-l2.html"));

  rc.input_configs = {InputConfig::ref};
  CHECK(code_of([&] { cmd_explain(rc); }) == ErrorCode::missing_segment);
  rc.traces = "/tmp";
  CHECK(code_of([&] { cmd_explain(rc); }) == ErrorCode::config);
}

TEST_CASE("evaluate is deterministic and the oracle is perfect") {
  auto rc = fixture_run();
  rc.include_oracle = true;
  rc.format = ReportFormat::tsv;
  const auto first = cmd_evaluate(rc);
  rc.threads = 1;
  CHECK(cmd_evaluate(rc) == first);

  rc.format = ReportFormat::json;
  const auto doc = json::parse(cmd_evaluate(rc));
  std::size_t oracle_rows = 0;
  for (const auto& r : doc["reports"]) {
    if (r["method"] != "oracle") continue;
    ++oracle_rows;
    CHECK(r["auc"] == 1.0);
    CHECK(r["recall_at_k"] == 1.0);
  }
  CHECK(oracle_rows > 0);
  // The reference-free instance only counts for the source config.
  for (const auto& r : doc["reports"])
    if (r["lang_pair"] == "fr-en" && r["input_config"] != "src")
      CHECK(r["n_sentences_auc"] == 1);
}

TEST_CASE("evaluate reports when nothing is evaluable") {
  auto rc = fixture_run();
  const auto dir = scratch_dir("noeval");
  write_file(dir / "clean.tsv",
             "system\tseg_id\trater\tseverity\tcategory\tsource\ttarget\treference\n"
             "s\t1\tr\tNo-error\tNo-error\tx\tall good\tall fine\n");
  rc.inputs = {dir / "clean.tsv"};
  CHECK(code_of([&] { cmd_evaluate(rc); }) == ErrorCode::no_evaluable);
}

TEST_CASE("head selection feeds the ensemble") {
  auto rc = fixture_run();
  rc.methods = {Method::attention};
  rc.input_configs = {InputConfig::src};
  CHECK(code_of([&] { cmd_select_heads(rc); }) == ErrorCode::config);  // k = 5 > 4 heads

  rc.top_k = 2;
  const std::string ranking = cmd_select_heads(rc);
  const auto recs = parse_head_rankings(ranking);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].ranking.selected.size() == 2);
  CHECK(recs[0].ranking.head_auc.size() == 4);

  const auto dir = scratch_dir("heads");
  write_file(dir / "heads.json", ranking);
  rc.heads_file = dir / "heads.json";
  CHECK_FALSE(cmd_evaluate(rc).empty());
  rc.top_k = 4;
  const auto all_four = cmd_evaluate(rc);
  rc.heads_file.reset();
  CHECK(all_four == cmd_evaluate(rc));
  rc.top_k = 5;
  rc.heads_file = dir / "heads.json";
  CHECK(code_of([&] { cmd_evaluate(rc); }) == ErrorCode::config);

  rc.methods = {Method::grad_l2};
  CHECK(code_of([&] { cmd_select_heads(rc); }) == ErrorCode::config);
}

TEST_CASE("corrupt writes labelled instances and a manifest") {
  RunConfig rc;
  rc.inputs = {data_path("corpus.tsv")};
  rc.lexicon = data_path("entity_lexicon.tsv");
  rc.donors = data_path("donors.txt");
  rc.per_category = 8;
  rc.seed = 3;
  const auto dir = scratch_dir("corrupt");
  rc.manifest_out = dir / "manifest.json";
  const std::string tsv = cmd_corrupt(rc);
  CHECK(cmd_corrupt(rc) == tsv);

  const auto back = parse_mqm_tsv_string(tsv);
  REQUIRE(back.size() == 32);
  std::map<std::string, int> per;
  for (const auto& inst : back) {
    REQUIRE(inst.gold_spans.size() == 1);
    CHECK(inst.gold_spans[0].severity == Severity::critical);
    ++per[sentence_category(inst)];
  }
  CHECK(per == std::map<std::string, int>{{"HALL", 8}, {"NE", 8}, {"NEG", 8}, {"NUM", 8}});

  const auto m = json::parse(read_file(dir / "manifest.json"));
  CHECK(m["corpus_size"] == 67);
  CHECK(m["eligible_instances"] == 65);
  CHECK(m["categories"][0]["category"] == "NEG");
  CHECK(m["categories"][0]["emitted"] == 8);

  rc.lexicon.reset();
  CHECK(code_of([&] { cmd_corrupt(rc); }) == ErrorCode::config);
}

TEST_CASE("exported traces validate and can be evaluated") {
  auto rc = fixture_run();
  const auto dir = scratch_dir("export");
  rc.out_dir = dir;
  const auto index = json::parse(cmd_export_traces(rc));
  CHECK(index["traces"].size() == 13);  // one instance lacks a reference
  CHECK(std::filesystem::exists(dir / "000000_src_ref" / "manifest.json"));

  RunConfig from_dir;
  from_dir.inputs = rc.inputs;
  from_dir.traces = dir;
  const auto ok = cmd_validate(from_dir);
  CHECK(ok.violations == 0);
  from_dir.include_oracle = true;
  CHECK_NOTHROW(cmd_evaluate(from_dir));

  // Corrupt one attention row and validation reports it.
  auto t = read_trace(dir / "000000_ref");
  t.attention.data[0] += 0.5;
  write_trace(t, dir / "000000_ref");
  const auto bad = cmd_validate(from_dir);
  CHECK(bad.violations > 0);
  CHECK(json::parse(bad.document)["violations"] == bad.violations);
  CHECK(code_of([&] { cmd_evaluate(from_dir); }) == ErrorCode::trace_format);
}

TEST_CASE("sentence categories") {
  CHECK(sentence_category(make_instance("a", "b")) == "none");
  CHECK(sentence_category(make_instance("a b", "b", std::nullopt,
                                        {{0, 1, Severity::minor, "NEG"}, {2, 3, Severity::minor, "NEG"}})) ==
        "NEG");
  CHECK(sentence_category(make_instance("a b", "b", std::nullopt,
                                        {{0, 1, Severity::minor, "NEG"}, {2, 3, Severity::minor, "NUM"}})) ==
        "mixed");
  CHECK(sentence_category(make_instance("a", "b", std::nullopt, {{0, 1, Severity::minor, ""}})) ==
        "uncategorized");
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hits[i] = 1; });
  CHECK(std::accumulate(hits.begin(), hits.end(), 0) == 100);
  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 17 || i == 60) throw Error(ErrorCode::shape, std::to_string(i));
    });
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "17");
  }
}
