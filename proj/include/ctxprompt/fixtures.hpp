#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ctxprompt/dataset.hpp"
#include "ctxprompt/metrics.hpp"

namespace ctxprompt {

// Synthetic corpus where each inference's first word is fixed by a hidden
// variable that only reaches the model through a context provider:
//   intent: "celebrate ..." or "cry ..." from the mentioned person's emotion (FE)
//   before: "walked ..." or "ran ..." from the weather in the caption (C)
//   after:  "go outside ..." or "stay inside ..." from the same weather (C)
// Both values of each hidden variable are equally likely.
struct FixtureOptions {
  std::size_t records = 2000;
  std::uint64_t seed = 7;
  // Probability that one relation of a record has no references.
  double empty_relation_rate = 0.03;
  // Probability that a second, unmentioned person is listed.
  double extra_person_rate = 0.25;
};

struct FixturePaths {
  std::filesystem::path records, graph, captions, emotions, lexicon;
  std::filesystem::path experiment_context, experiment_baseline, grid;
};

// Writes records.jsonl, graph.csv, captions.tsv, emotions.csv, lexicon.json
// and ready-to-run configs (context.kv, baseline.kv, grid.kv) into dir.
// Config paths are relative to dir.
FixturePaths write_fixtures(const std::filesystem::path& dir, const FixtureOptions& options = {});

std::vector<EventRecord> fixture_records(const FixtureOptions& options = {});

// Fraction of generated samples whose first word equals the first word of a
// reference for the same record and relation.
double first_token_accuracy(const std::vector<EventRecord>& records, const Generations& generations);

}  // namespace ctxprompt
