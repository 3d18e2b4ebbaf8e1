#include "ctxprompt/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "ctxprompt/error.hpp"
#include "ctxprompt/porter_stemmer.hpp"
#include "ctxprompt/text.hpp"

namespace ctxprompt {

namespace {

using NgramCounts = std::map<std::string, std::size_t>;

std::string ngram_key(const Tokens& tokens, std::size_t start, std::size_t n) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) key += '\x1f';
    key += tokens[start + i];
  }
  return key;
}

NgramCounts count_ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[ngram_key(tokens, i, n)];
  return counts;
}

void require_pairs(const std::vector<ScoredPair>& pairs) {
  if (pairs.empty()) throw ValidationError("metric needs at least one pair");
  for (const auto& p : pairs) {
    if (p.references.empty()) throw ValidationError("scored pair without references");
  }
}

}  // namespace

BleuStats bleu_stats(const std::vector<ScoredPair>& pairs, int max_order) {
  require_pairs(pairs);
  BleuStats s;
  const auto orders = static_cast<std::size_t>(max_order);
  s.matches.assign(orders, 0);
  s.totals.assign(orders, 0);
  for (const auto& p : pairs) {
    const std::size_t c = p.candidate.size();
    s.candidate_length += c;
    std::size_t best = p.references.front().size();
    for (const auto& ref : p.references) {
      const std::size_t r = ref.size();
      const auto diff = [c](std::size_t x) { return x > c ? x - c : c - x; };
      if (diff(r) < diff(best) || (diff(r) == diff(best) && r < best)) best = r;
    }
    s.reference_length += best;
    for (std::size_t n = 1; n <= orders; ++n) {
      const auto cand = count_ngrams(p.candidate, n);
      NgramCounts max_ref;
      for (const auto& ref : p.references) {
        for (const auto& [g, k] : count_ngrams(ref, n)) {
          auto& slot = max_ref[g];
          slot = std::max(slot, k);
        }
      }
      for (const auto& [g, k] : cand) {
        auto it = max_ref.find(g);
        if (it != max_ref.end()) s.matches[n - 1] += std::min(k, it->second);
      }
      if (c >= n) s.totals[n - 1] += c - n + 1;
    }
  }
  return s;
}

double bleu(const std::vector<ScoredPair>& pairs, const BleuOptions& options) {
  if (options.max_order < 1) throw ValidationError("BLEU order must be >= 1");
  const auto s = bleu_stats(pairs, options.max_order);
  if (s.candidate_length == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < s.matches.size(); ++n) {
    double matches = static_cast<double>(s.matches[n]);
    const double total = static_cast<double>(s.totals[n]);
    if (matches == 0.0) {
      if (options.smoothing_epsilon <= 0.0 || total == 0.0) return 0.0;
      matches = options.smoothing_epsilon;
    }
    log_sum += std::log(matches / total);
  }
  const double c = static_cast<double>(s.candidate_length);
  const double r = static_cast<double>(s.reference_length);
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum / static_cast<double>(s.matches.size()));
}

double bleu2(const std::vector<ScoredPair>& pairs) { return bleu(pairs, {}); }

namespace {

// Synonym class of each word: smallest member of its connected component.
std::unordered_map<std::string, std::string> synonym_classes(
    const std::map<std::string, std::vector<std::string>>& lexicon) {
  std::unordered_map<std::string, std::string> parent;
  const std::function<std::string(const std::string&)> find = [&](const std::string& x) {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent[x] = x;
      return x;
    }
    if (it->second == x) return x;
    const auto root = find(it->second);
    parent[x] = root;
    return root;
  };
  for (const auto& [word, syns] : lexicon) {
    for (const auto& s : syns) {
      const auto a = find(word);
      const auto b = find(s);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::unordered_map<std::string, std::string> out;
  for (const auto& [w, _] : parent) out[w] = find(w);
  return out;
}

constexpr std::size_t kStages = 3;
constexpr std::size_t kSearchBudget = 200000;

struct AlignProblem {
  // keys[stage][i]: match key of candidate / reference token i at that stage;
  // empty means the token cannot match at that stage.
  std::array<std::vector<std::string>, kStages> cand_keys;
  std::array<std::vector<std::string>, kStages> ref_keys;
  // remaining quota per (stage, key)
  std::array<std::map<std::string, std::size_t>, kStages> quota;
  std::size_t total_quota = 0;
};

// Stage at which candidate i and reference j pair up: the first stage whose
// keys agree. kStages when they never match.
std::size_t pair_stage(const AlignProblem& p, std::size_t i, std::size_t j) {
  for (std::size_t s = 0; s < kStages; ++s) {
    const auto& a = p.cand_keys[s][i];
    if (!a.empty() && a == p.ref_keys[s][j]) return s;
  }
  return kStages;
}

struct Search {
  const AlignProblem& problem;
  std::size_t n_cand;
  std::size_t n_ref;
  std::vector<bool> ref_used = {};
  std::size_t best_chunks = std::numeric_limits<std::size_t>::max();
  std::array<std::size_t, kStages> best_stage_counts{};
  std::array<std::size_t, kStages> stage_counts{};
  std::array<std::map<std::string, std::size_t>, kStages> quota = {};
  std::size_t remaining = 0;
  std::size_t nodes = 0;

  // prev_j: reference index of the last matched candidate (or npos),
  // prev_i: that candidate's index.
  void dfs(std::size_t i, std::size_t prev_i, std::size_t prev_j, std::size_t chunks) {
    if (++nodes > kSearchBudget && best_chunks != std::numeric_limits<std::size_t>::max()) return;
    if (chunks >= best_chunks) return;
    if (remaining == 0) {
      best_chunks = chunks;
      best_stage_counts = stage_counts;
      return;
    }
    if (i >= n_cand || n_cand - i < remaining) return;
    // Try the reference token that would extend the current chunk first.
    std::vector<std::size_t> order;
    order.reserve(n_ref);
    if (prev_j != npos && prev_i + 1 == i && prev_j + 1 < n_ref) order.push_back(prev_j + 1);
    for (std::size_t j = 0; j < n_ref; ++j) {
      if (order.empty() || j != order.front()) order.push_back(j);
    }
    for (std::size_t j : order) {
      if (ref_used[j]) continue;
      const std::size_t s = pair_stage(problem, i, j);
      if (s == kStages) continue;
      auto it = quota[s].find(problem.cand_keys[s][i]);
      if (it == quota[s].end() || it->second == 0) continue;
      const bool extends = prev_j != npos && prev_i + 1 == i && prev_j + 1 == j;
      ref_used[j] = true;
      --it->second;
      --remaining;
      ++stage_counts[s];
      dfs(i + 1, i, j, chunks + (extends ? 0 : 1));
      --stage_counts[s];
      ++remaining;
      ++it->second;
      ref_used[j] = false;
    }
    dfs(i + 1, prev_i, prev_j, chunks);
  }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
};

}  // namespace

MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference,
                             const MeteorOptions& options) {
  AlignProblem p;
  std::unordered_map<std::string, std::string> syn;
  if (options.synonyms != nullptr) syn = synonym_classes(*options.synonyms);
  const auto keys = [&](const Tokens& toks, std::array<std::vector<std::string>, kStages>& out) {
    for (const auto& w : toks) {
      out[0].push_back(w);
      out[1].push_back(porter_stem(w));
      auto it = syn.find(w);
      out[2].push_back(it == syn.end() ? std::string() : it->second);
    }
  };
  keys(candidate, p.cand_keys);
  keys(reference, p.ref_keys);

  // Stage quotas: per key, min of the still-unmatched counts on each side.
  // Which tokens a stage consumes never changes later-stage counts because
  // consumed tokens share the stage key.
  std::vector<bool> cand_left(candidate.size(), true);
  std::vector<bool> ref_left(reference.size(), true);
  for (std::size_t s = 0; s < kStages; ++s) {
    std::map<std::string, std::vector<std::size_t>> cand_by;
    std::map<std::string, std::vector<std::size_t>> ref_by;
    for (std::size_t i = 0; i < candidate.size(); ++i) {
      if (cand_left[i] && !p.cand_keys[s][i].empty()) cand_by[p.cand_keys[s][i]].push_back(i);
    }
    for (std::size_t j = 0; j < reference.size(); ++j) {
      if (ref_left[j] && !p.ref_keys[s][j].empty()) ref_by[p.ref_keys[s][j]].push_back(j);
    }
    for (const auto& [key, cands] : cand_by) {
      auto it = ref_by.find(key);
      if (it == ref_by.end()) continue;
      const std::size_t q = std::min(cands.size(), it->second.size());
      p.quota[s][key] = q;
      p.total_quota += q;
      for (std::size_t t = 0; t < q; ++t) {
        cand_left[cands[t]] = false;
        ref_left[it->second[t]] = false;
      }
    }
  }

  MeteorAlignment result;
  if (p.total_quota == 0) return result;
  Search search{p, candidate.size(), reference.size()};
  search.ref_used.assign(reference.size(), false);
  search.quota = p.quota;
  search.remaining = p.total_quota;
  search.dfs(0, Search::npos, Search::npos, 0);
  result.matches = p.total_quota;
  result.chunks = search.best_chunks;
  result.exact = search.best_stage_counts[0];
  result.stem = search.best_stage_counts[1];
  result.synonym = search.best_stage_counts[2];
  return result;
}

namespace {

double meteor_score(const MeteorAlignment& a, std::size_t cand_len, std::size_t ref_len,
                    const MeteorOptions& o) {
  if (a.matches == 0 || cand_len == 0 || ref_len == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double precision = m / static_cast<double>(cand_len);
  const double recall = m / static_cast<double>(ref_len);
  const double f = precision * recall / (o.alpha * precision + (1.0 - o.alpha) * recall);
  const double penalty = o.gamma * std::pow(static_cast<double>(a.chunks) / m, o.beta);
  return f * (1.0 - penalty);
}

}  // namespace

double meteor_pair(const ScoredPair& pair, const MeteorOptions& options) {
  if (pair.references.empty()) throw ValidationError("scored pair without references");
  double best = 0.0;
  for (const auto& ref : pair.references) {
    const auto a = meteor_align(pair.candidate, ref, options);
    best = std::max(best, meteor_score(a, pair.candidate.size(), ref.size(), options));
  }
  return best;
}

double meteor(const std::vector<ScoredPair>& pairs, const MeteorOptions& options) {
  require_pairs(pairs);
  double sum = 0.0;
  for (const auto& p : pairs) sum += meteor_pair(p, options);
  return sum / static_cast<double>(pairs.size());
}

std::vector<double> cider_per_pair(const std::vector<ScoredPair>& pairs) {
  require_pairs(pairs);
  constexpr std::size_t kMaxOrder = 4;
  const double n_pairs = static_cast<double>(pairs.size());
  std::array<std::map<std::string, std::size_t>, kMaxOrder> df;
  for (const auto& p : pairs) {
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      std::map<std::string, bool> seen;
      for (const auto& ref : p.references) {
        for (const auto& [g, _] : count_ngrams(ref, n)) seen[g] = true;
      }
      for (const auto& [g, _] : seen) ++df[n - 1][g];
    }
  }
  const auto vectorize = [&](const Tokens& toks, std::size_t n) {
    std::map<std::string, double> vec;
    for (const auto& [g, k] : count_ngrams(toks, n)) {
      auto it = df[n - 1].find(g);
      const double d = it == df[n - 1].end() ? 0.0 : static_cast<double>(it->second);
      vec[g] = static_cast<double>(k) * std::log(n_pairs / std::max(1.0, d));
    }
    return vec;
  };
  const auto norm = [](const std::map<std::string, double>& v) {
    double s = 0.0;
    for (const auto& [_, x] : v) s += x * x;
    return std::sqrt(s);
  };
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& p : pairs) {
    double over_n = 0.0;
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      const auto cv = vectorize(p.candidate, n);
      const double cn = norm(cv);
      double over_refs = 0.0;
      for (const auto& ref : p.references) {
        const auto rv = vectorize(ref, n);
        const double rn = norm(rv);
        if (cn == 0.0 || rn == 0.0) continue;
        double dot = 0.0;
        for (const auto& [g, x] : cv) {
          auto it = rv.find(g);
          if (it != rv.end()) dot += x * it->second;
        }
        over_refs += dot / (cn * rn);
      }
      over_n += over_refs / static_cast<double>(p.references.size());
    }
    scores.push_back(10.0 * over_n / static_cast<double>(kMaxOrder));
  }
  return scores;
}

double cider(const std::vector<ScoredPair>& pairs) {
  const auto per = cider_per_pair(pairs);
  return std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
}

MetricReport evaluate(const std::vector<EventRecord>& records, const Generations& generations,
                      const EvaluateOptions& options) {
  std::map<std::string, const EventRecord*> by_id;
  for (const auto& r : records) by_id[r.record_id] = &r;

  struct Group {
    const EventRecord* record;
    Relation relation;
    std::size_t begin;
    std::size_t end;
  };
  MetricReport report;
  std::vector<ScoredPair> pairs;
  std::vector<Group> groups;
  for (const auto& [key, samples] : generations) {
    auto it = by_id.find(key.first);
    if (it == by_id.end()) {
      throw ValidationError("generation for unknown record '" + key.first + "'");
    }
    const auto& refs = it->second->references(key.second);
    if (refs.empty()) {
      report.warnings.push_back("record '" + key.first + "' has no " +
                                std::string(relation_name(key.second)) +
                                " references; skipped");
      ++report.skipped_groups;
      continue;
    }
    std::vector<Tokens> ref_tokens;
    for (const auto& r : refs) ref_tokens.push_back(text::scoring_tokens(r));
    Group g{it->second, key.second, pairs.size(), 0};
    for (const auto& s : samples) pairs.push_back({text::scoring_tokens(s), ref_tokens});
    g.end = pairs.size();
    if (g.end > g.begin) groups.push_back(g);
  }
  report.groups = groups.size();
  if (pairs.empty()) return report;

  std::vector<double> sent_bleu(pairs.size());
  std::vector<double> sent_meteor(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    sent_bleu[i] = bleu({pairs[i]}, options.bleu);
    sent_meteor[i] = meteor_pair(pairs[i], options.meteor);
  }
  const auto sent_cider = cider_per_pair(pairs);

  for (const auto& g : groups) {
    MetricScores s;
    s.pairs = g.end - g.begin;
    for (std::size_t i = g.begin; i < g.end; ++i) {
      s.bleu2 += sent_bleu[i];
      s.meteor += sent_meteor[i];
      s.cider += sent_cider[i];
    }
    const double inv = 1.0 / static_cast<double>(s.pairs);
    s.bleu2 *= inv;
    s.meteor *= inv;
    s.cider *= inv;
    report.per_record[g.record->record_id][g.relation] = s;
  }

  if (options.aggregate == Aggregate::Mean) {
    report.pairs = pairs.size();
    report.bleu2 = bleu(pairs, options.bleu);
    report.meteor = std::accumulate(sent_meteor.begin(), sent_meteor.end(), 0.0) /
                    static_cast<double>(pairs.size());
    report.cider = std::accumulate(sent_cider.begin(), sent_cider.end(), 0.0) /
                   static_cast<double>(pairs.size());
    return report;
  }

  const auto best_of = [](const std::vector<double>& v, std::size_t b, std::size_t e) {
    std::size_t best = b;
    for (std::size_t i = b + 1; i < e; ++i) {
      if (v[i] > v[best]) best = i;
    }
    return best;
  };
  std::vector<ScoredPair> chosen;
  double meteor_sum = 0.0;
  double cider_sum = 0.0;
  for (const auto& g : groups) {
    chosen.push_back(pairs[best_of(sent_bleu, g.begin, g.end)]);
    meteor_sum += sent_meteor[best_of(sent_meteor, g.begin, g.end)];
    cider_sum += sent_cider[best_of(sent_cider, g.begin, g.end)];
  }
  report.pairs = groups.size();
  report.bleu2 = bleu(chosen, options.bleu);
  report.meteor = meteor_sum / static_cast<double>(groups.size());
  report.cider = cider_sum / static_cast<double>(groups.size());
  return report;
}

}  // namespace ctxprompt
