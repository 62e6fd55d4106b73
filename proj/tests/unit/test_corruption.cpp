// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "corruption.hpp"
#include "helpers.hpp"
#include "io.hpp"

using namespace mlens;
using namespace mlens::testing;

namespace {

CorruptionSpec spec(CorruptionCategory c, std::uint64_t seed = 1) {
  CorruptionSpec s;
  s.category = c;
  s.seed = seed;
  s.entity_lexicon = {{"CITY", "Paris"}, {"CITY", "London"}, {"ORG", "UNESCO"}};
  s.donor_corpus = {"Yes.", "Heavy rain flooded several streets near the harbour."};
  return s;
}

std::string span_text(const Corruption& c) {
  return c.instance.translation.text.substr(c.span.char_start,
                                            c.span.char_end - c.span.char_start);
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

TEST_CASE("eligibility excludes annotated and copied translations") {
  CHECK(eligible(make_instance("a b", "x", "c d")));
  CHECK_FALSE(eligible(make_instance("a b", "x", "a b")));
  CHECK_FALSE(eligible(make_instance("a b", "x", "c d", {{0, 1, Severity::minor, "x"}})));
  CHECK(eligible(make_instance("a b", "x")));
}

TEST_CASE("NUM replaces one numeric word") {
  const auto inst = make_instance("He paid 300 dollars.", "x", "He paid 300 USD.");
  const auto c = corrupt_number(inst, spec(CorruptionCategory::num));
  CHECK(c.span.char_start == 8);
  CHECK(span_text(c) != "300");
  CHECK(c.instance.translation.text.starts_with("He paid "));
  CHECK(c.instance.translation.text.ends_with(" dollars."));
  CHECK(c.instance.gold_spans == std::vector<ErrorSpan>{c.span});
  CHECK(c.span.severity == Severity::critical);
  CHECK(c.span.category == "NUM");
  CHECK(c.instance.id == "t1/NUM");
  CHECK(c.instance.metadata.at("origin") == "t1");
  CHECK(code_of([&] { corrupt_number(make_instance("no digits", "x"), spec(CorruptionCategory::num)); }) ==
        ErrorCode::no_corruption_site);
}

TEST_CASE("NUM keeps separators and trailing punctuation") {
  const auto inst = make_instance("It cost 1,250.", "x");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = corrupt_number(inst, spec(CorruptionCategory::num, seed));
    CHECK(c.instance.translation.text.back() == '.');
    CHECK(span_text(c) != "1,250");
    CHECK(c.span.char_start == 8);
  }
}

TEST_CASE("NEG deletes an explicit negation") {
  const auto inst = make_instance("Kenji did not expect guests.", "x");
  const auto c = corrupt_negation(inst, spec(CorruptionCategory::neg));
  CHECK(c.instance.translation.text == "Kenji did expect guests.");
  CHECK(span_text(c) == "did expect");
}

TEST_CASE("NEG resolves contractions") {
  CHECK(span_text(corrupt_negation(make_instance("We can't go", "x"), spec(CorruptionCategory::neg))) == "can");
  const auto w = corrupt_negation(make_instance("Won't stop", "x"), spec(CorruptionCategory::neg));
  CHECK(w.instance.translation.text == "Will stop");
  const auto d = corrupt_negation(make_instance("It doesn't work", "x"), spec(CorruptionCategory::neg));
  CHECK(d.instance.translation.text == "It does work");
  CHECK(span_text(d) == "does");
}

TEST_CASE("NEG inserts not after the first auxiliary") {
  const auto c = corrupt_negation(make_instance("The train is late and was full", "x"),
                                  spec(CorruptionCategory::neg));
  CHECK(c.instance.translation.text == "The train is not late and was full");
  CHECK(span_text(c) == "not");
  CHECK(code_of([&] { corrupt_negation(make_instance("Lovely weather", "x"), spec(CorruptionCategory::neg)); }) ==
        ErrorCode::no_corruption_site);
}

TEST_CASE("NE swaps an entity for another of the same type") {
  const auto c = corrupt_named_entity(make_instance("Bob flew to Paris.", "x"),
                                      spec(CorruptionCategory::ne));
  CHECK(c.instance.translation.text == "Bob flew to London.");
  CHECK(span_text(c) == "London");
  // Single-surface types have nothing to swap with.
  CHECK(code_of([&] {
          corrupt_named_entity(make_instance("UNESCO met", "x"), spec(CorruptionCategory::ne));
        }) == ErrorCode::no_corruption_site);
}

TEST_CASE("HALL inserts a donor phrase at a word boundary") {
  const auto inst = make_instance("The bridge opened today", "x");
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto c = corrupt_hallucination(inst, spec(CorruptionCategory::hall, seed));
    const std::string phrase = span_text(c);
    const auto n = tokenize(phrase).words.size();
    CHECK((n >= 3 && n <= 8));
    CHECK(std::string("Heavy rain flooded several streets near the harbour").find(phrase) !=
          std::string::npos);
    std::string rebuilt = c.instance.translation.text;
    rebuilt.erase(c.span.char_start, phrase.size() + 1);
    CHECK(rebuilt == inst.translation.text);
  }
  auto bad = spec(CorruptionCategory::hall);
  bad.donor_corpus = {"Too short", "No."};
  CHECK(code_of([&] { corrupt_hallucination(inst, bad); }) == ErrorCode::insufficient_donor);
}

TEST_CASE("HALL appends to one-word translations") {
  const auto c = corrupt_hallucination(make_instance("Hello", "x"), spec(CorruptionCategory::hall));
  CHECK(c.instance.translation.text.starts_with("Hello "));
  CHECK(c.span.char_start == 6);
  CHECK(c.span.char_end == c.instance.translation.text.size());
}

TEST_CASE("generators are seed-deterministic and seed-sensitive") {
  const auto inst = make_instance("Maria paid 41 and 77 and 93 euros in 2001", "x");
  std::set<std::string> outputs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = corrupt_number(inst, spec(CorruptionCategory::num, seed));
    const auto b = corrupt_number(inst, spec(CorruptionCategory::num, seed));
    CHECK(a.instance.translation.text == b.instance.translation.text);
    outputs.insert(a.instance.translation.text);
  }
  CHECK(outputs.size() > 1);
}

TEST_CASE("corruption set manifest explains skips") {
  std::vector<EvaluationInstance> corpus{
      make_instance("It has 3 rooms", "x", "y", {}, "a"),
      make_instance("Lovely weather", "x", "y", {}, "b"),
      make_instance("copy", "x", "copy", {}, "c"),
      make_instance("It has 3 rooms", "x", "y", {{0, 2, Severity::minor, "z"}}, "d"),
  };
  const std::vector<CorruptionSpec> specs{spec(CorruptionCategory::num),
                                          spec(CorruptionCategory::neg)};
  const auto set = build_corruption_set(corpus, specs, {{CorruptionCategory::neg, 5}});
  CHECK(set.manifest.corpus_size == 4);
  CHECK(set.manifest.eligible_instances == 2);
  REQUIRE(set.manifest.categories.size() == 2);
  const auto& num = set.manifest.categories[0];
  CHECK(num.emitted == 1);
  CHECK_FALSE(num.target.has_value());
  CHECK(num.skipped.at("no_corruption_site") == 1);
  CHECK(num.skipped.at("copy_of_reference") == 1);
  CHECK(num.skipped.at("has_gold_spans") == 1);
  CHECK(set.manifest.categories[1].emitted == 1);
  CHECK(set.manifest.notes.size() == 1);  // NEG fell short of its target
  CHECK(set.instances.size() == 2);
}

TEST_CASE("lexicon and donor loading") {
  const auto lex = load_entity_lexicon(data_path("entity_lexicon.tsv"));
  CHECK(lex.size() == 13);
  CHECK(lex.back().type == "ORG");
  const auto donors = load_donor_corpus(data_path("donors.txt"));
  CHECK(donors.size() == 8);
  const auto dir = scratch_dir("lexicon");
  write_file(dir / "bad.tsv", "CITY\tParis\nno tab here\n");
  try {
    load_entity_lexicon(dir / "bad.tsv");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(e.line() == 2);
  }
}
