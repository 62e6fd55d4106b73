// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0
//
// Rule-based generators of critical translation errors (negation flips,
// inserted hallucinations, named-entity swaps, numeric changes). Every
// generator returns a new instance with exactly one gold span over the edit.
// English targets only.

#ifndef METRIC_LENS_CORRUPTION_HPP_
#define METRIC_LENS_CORRUPTION_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"

namespace mlens {

enum class CorruptionCategory { neg, hall, ne, num };

const char* to_string(CorruptionCategory category);
CorruptionCategory parse_corruption_category(std::string_view name);

struct EntityEntry {
  std::string type;
  std::string surface;
};

struct CorruptionSpec {
  CorruptionCategory category = CorruptionCategory::num;
  std::uint64_t seed = 0;
  std::vector<std::string> donor_corpus;    // HALL
  std::vector<EntityEntry> entity_lexicon;  // NE
};

struct Corruption {
  EvaluationInstance instance;
  ErrorSpan span;
};

// True iff the instance has no gold spans and its translation is not a
// verbatim copy of the reference.
bool eligible(const EvaluationInstance& instance);

// Each throws ErrorCode::no_corruption_site when the rule has nowhere to
// apply; corrupt_hallucination throws ErrorCode::insufficient_donor when no
// donor sentence has at least three words.
Corruption corrupt_number(const EvaluationInstance& instance, const CorruptionSpec& spec);
Corruption corrupt_negation(const EvaluationInstance& instance, const CorruptionSpec& spec);
Corruption corrupt_named_entity(const EvaluationInstance& instance,
                                const CorruptionSpec& spec);
Corruption corrupt_hallucination(const EvaluationInstance& instance,
                                 const CorruptionSpec& spec);
Corruption corrupt(const EvaluationInstance& instance, const CorruptionSpec& spec);

struct CategoryManifest {
  CorruptionCategory category;
  std::optional<std::size_t> target;
  std::size_t emitted = 0;
  std::map<std::string, std::size_t> skipped;  // reason -> count
};

struct CorruptionManifest {
  std::size_t corpus_size = 0;
  std::size_t eligible_instances = 0;
  std::vector<CategoryManifest> categories;
  std::vector<std::string> notes;
};

struct CorruptionSet {
  std::vector<EvaluationInstance> instances;
  CorruptionManifest manifest;
};

// Applies each spec, in order, to the eligible instances until its target
// (absent = no limit) is met or the corpus is exhausted.
CorruptionSet build_corruption_set(
    std::span<const EvaluationInstance> corpus, std::span<const CorruptionSpec> specs,
    const std::map<CorruptionCategory, std::size_t>& per_category_target);

// `type<TAB>surface` per line; blank lines and '#' comments are skipped.
std::vector<EntityEntry> load_entity_lexicon(const std::filesystem::path& path);
// One sentence per line.
std::vector<std::string> load_donor_corpus(const std::filesystem::path& path);

}  // namespace mlens

#endif  // METRIC_LENS_CORRUPTION_HPP_
