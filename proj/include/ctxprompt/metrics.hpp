#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ctxprompt/dataset.hpp"

namespace ctxprompt {

using Tokens = std::vector<std::string>;

struct ScoredPair {
  Tokens candidate;
  std::vector<Tokens> references;  // nonempty
};

// Clipped n-gram statistics pooled over a corpus.
struct BleuStats {
  std::vector<std::size_t> matches;  // per order
  std::vector<std::size_t> totals;   // candidate n-grams per order
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;  // closest reference length (ties: shorter)
};

BleuStats bleu_stats(const std::vector<ScoredPair>& pairs, int max_order = 2);

struct BleuOptions {
  int max_order = 2;
  // When > 0, zero match counts are replaced by this value.
  double smoothing_epsilon = 0.0;
};

// Corpus BLEU (default order 2): geometric mean of clipped precisions times
// exp(1 - r/c) when c < r.
double bleu(const std::vector<ScoredPair>& pairs, const BleuOptions& options = {});
double bleu2(const std::vector<ScoredPair>& pairs);

// phrase -> synonyms; the synonym stage matches words in the same connected
// component of this relation.
struct MeteorOptions {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
  const std::map<std::string, std::vector<std::string>>* synonyms = nullptr;
};

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  std::size_t exact = 0;
  std::size_t stem = 0;
  std::size_t synonym = 0;
};

// Staged unigram alignment (exact, then Porter stem, then synonym) between
// candidate and reference, choosing among maximal stage matchings the one with
// the fewest chunks.
MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference,
                             const MeteorOptions& options = {});
double meteor_pair(const ScoredPair& pair, const MeteorOptions& options = {});
// Mean over pairs of the best-reference score.
double meteor(const std::vector<ScoredPair>& pairs, const MeteorOptions& options = {});

// CIDEr with n = 1..4. idf(g) = log(N / max(1, df(g))) where N is the number of
// pairs and df(g) counts pairs whose reference set contains g. Per pair the
// score is 10 * mean_n mean_refs cos(tfidf(candidate), tfidf(reference)).
std::vector<double> cider_per_pair(const std::vector<ScoredPair>& pairs);
double cider(const std::vector<ScoredPair>& pairs);

struct MetricScores {
  double bleu2 = 0.0;
  double meteor = 0.0;
  double cider = 0.0;
  std::size_t pairs = 0;
};

enum class Aggregate { Mean, Max };

struct MetricReport {
  double bleu2 = 0.0;
  double meteor = 0.0;
  double cider = 0.0;
  // record_id -> relation -> scores averaged over that record's pairs
  std::map<std::string, std::map<Relation, MetricScores>> per_record;
  std::size_t pairs = 0;
  std::size_t groups = 0;
  std::size_t skipped_groups = 0;
  std::vector<std::string> warnings;
};

struct EvaluateOptions {
  Aggregate aggregate = Aggregate::Mean;
  BleuOptions bleu;
  MeteorOptions meteor;
};

using GenerationKey = std::pair<std::string, Relation>;
using Generations = std::map<GenerationKey, std::vector<std::string>>;

// One ScoredPair per generated sentence with the record's references for the
// relation; generations for relations without references are skipped with a
// warning. With Aggregate::Max each (record, relation) keeps only its best
// sample per metric.
MetricReport evaluate(const std::vector<EventRecord>& records, const Generations& generations,
                      const EvaluateOptions& options = {});

}  // namespace ctxprompt
