#pragma once

// Seeded random inputs shared by the unit and acceptance tests.

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ctxprompt/knowledge.hpp"
#include "ctxprompt/rng.hpp"
#include "oracles.hpp"

namespace cases {

struct MatcherCase {
  std::string text;
  std::vector<std::pair<std::size_t, std::size_t>> words;
  ctxprompt::KnowledgeGraph graph;
  std::set<std::string> exclusions;
};

inline MatcherCase matcher_case(std::uint64_t seed) {
  static const std::vector<std::string> vocab = {"red",  "car",   "dining", "room", "ice",
                                                 "cream", "table", "big",    "dog",  "park",
                                                 "Sun",   "hat"};
  static const std::vector<std::string> seps = {" ", " ", " ", ", ", ". ", " (", ") "};
  ctxprompt::SplitMix64 rng(seed);
  MatcherCase c;
  const std::size_t n_words = 1 + rng.uniform_below(40);
  for (std::size_t i = 0; i < n_words; ++i) {
    if (i > 0) c.text += seps[rng.uniform_below(seps.size())];
    std::string w = vocab[rng.uniform_below(vocab.size())];
    if (rng.uniform_below(4) == 0) w[0] = static_cast<char>(std::toupper(w[0]));
    c.words.emplace_back(c.text.size(), c.text.size() + w.size());
    c.text += w;
  }
  std::vector<ctxprompt::Triple> triples;
  const std::size_t n_subjects = 1 + rng.uniform_below(30);
  for (std::size_t i = 0; i < n_subjects; ++i) {
    std::string s;
    const std::size_t len = 1 + rng.uniform_below(3);
    for (std::size_t k = 0; k < len; ++k) {
      if (k) s += " ";
      s += ctxprompt::canonical_phrase(vocab[rng.uniform_below(vocab.size())]);
    }
    triples.push_back({s, ctxprompt::Predicate(ctxprompt::Predicate::Kind::HasProperty), "x" + std::to_string(i),
                       static_cast<double>(rng.uniform_below(10))});
  }
  c.graph = ctxprompt::KnowledgeGraph(triples);
  if (rng.uniform_below(2) == 0) c.exclusions.insert(*c.graph.subjects().begin());
  return c;
}

inline std::set<std::string> allowed_phrases(const MatcherCase& c) {
  std::set<std::string> out;
  for (const auto& s : c.graph.subjects()) {
    if (!c.exclusions.count(s)) out.insert(s);
  }
  return out;
}

// Vocabulary for random metric pairs: inflected pairs share Porter stems and
// two synonym classes are disjoint from every stem class.
inline const std::vector<std::string>& metric_vocab() {
  static const std::vector<std::string> v = {"cat", "cats", "sleep", "sleeps", "dog",   "puppy",
                                             "the", "a",    "run",   "running", "big",  "large"};
  return v;
}

// Stems frozen from a reference Porter implementation.
inline const std::map<std::string, std::string>& metric_stems() {
  static const std::map<std::string, std::string> m = {
      {"cat", "cat"}, {"cats", "cat"},  {"sleep", "sleep"}, {"sleeps", "sleep"},
      {"dog", "dog"}, {"puppy", "puppi"}, {"the", "the"},   {"a", "a"},
      {"run", "run"}, {"running", "run"}, {"big", "big"},   {"large", "larg"}};
  return m;
}

inline const std::map<std::string, std::vector<std::string>>& metric_synonyms() {
  static const std::map<std::string, std::vector<std::string>> m = {{"dog", {"puppy"}},
                                                                    {"big", {"large"}}};
  return m;
}

inline int metric_stage(const std::string& a, const std::string& b) {
  if (a == b) return 0;
  if (metric_stems().at(a) == metric_stems().at(b)) return 1;
  auto cls = [](const std::string& w) -> std::string {
    if (w == "dog" || w == "puppy") return "dog";
    if (w == "big" || w == "large") return "big";
    return "";
  };
  if (!cls(a).empty() && cls(a) == cls(b)) return 2;
  return -1;
}

inline oracle::Tokens random_tokens(ctxprompt::SplitMix64& rng, std::size_t min_len) {
  const std::size_t len = min_len + rng.uniform_below(9 - min_len);
  oracle::Tokens t;
  for (std::size_t i = 0; i < len; ++i) t.push_back(metric_vocab()[rng.uniform_below(metric_vocab().size())]);
  return t;
}

// n random pairs, tokens <= 8 per sentence, 1-3 references each.
inline std::vector<oracle::Pair> metric_pairs(std::uint64_t seed, std::size_t n) {
  ctxprompt::SplitMix64 rng(seed);
  std::vector<oracle::Pair> out;
  for (std::size_t i = 0; i < n; ++i) {
    oracle::Pair p;
    p.candidate = random_tokens(rng, 1);
    const std::size_t refs = 1 + rng.uniform_below(3);
    for (std::size_t r = 0; r < refs; ++r) p.references.push_back(random_tokens(rng, 1));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace cases
