#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxprompt/context_text.hpp"

namespace ctxprompt {

struct EventRecord;

class Predicate {
 public:
  enum class Kind { AtLocation, CapableOf, HasA, HasProperty, IsA, PartOf, Other };

  Predicate() = default;
  explicit Predicate(Kind kind) : kind_(kind) {}

  // Known names map to their kind; anything else becomes Other(name), case preserved.
  static Predicate from_name(std::string_view name);

  Kind kind() const { return kind_; }
  std::string name() const;

  friend bool operator==(const Predicate&, const Predicate&) = default;

 private:
  Kind kind_ = Kind::HasProperty;
  std::string other_;
};

struct Triple {
  std::string subject;
  Predicate predicate;
  std::string object;
  double weight = 0.0;

  std::string to_string() const;
  friend bool operator==(const Triple&, const Triple&) = default;
};

// Immutable weighted triple store with a subject index.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  explicit KnowledgeGraph(std::vector<Triple> triples);

  const std::vector<Triple>& triples() const { return triples_; }
  std::size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }

  // Indices into triples() whose subject equals phrase; empty when unknown.
  const std::vector<std::size_t>& by_subject(const std::string& phrase) const;
  bool has_subject(const std::string& phrase) const { return index_.contains(phrase); }
  const std::set<std::string>& subjects() const { return subjects_; }
  std::size_t max_subject_words() const { return max_subject_words_; }

 private:
  std::vector<Triple> triples_;
  std::unordered_map<std::string, std::vector<std::size_t>> index_;
  std::set<std::string> subjects_;
  std::size_t max_subject_words_ = 0;
};

// Lowercase, underscores to spaces, whitespace collapsed.
std::string canonical_phrase(std::string_view raw);

// Edge list: comma-separated subject,predicate,object,weight. An optional
// header row is recognised by a first cell equal to "subject".
KnowledgeGraph parse_graph(std::istream& in, const std::string& source = "<input>");
KnowledgeGraph load_graph(const std::filesystem::path& path);

struct ConceptMatch {
  std::string surface;  // as written in the source text
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::vector<Triple> triples;
};

// Case-insensitive, word-bounded, longest-match-wins left-to-right scan of text
// against the graph subjects. Phrases in exclusions (lowercase) never match.
std::vector<ConceptMatch> match_concepts(std::string_view text, const KnowledgeGraph& graph,
                                         const std::set<std::string>& exclusions);

// Pool the matched triples whose predicate is listed, drop exact duplicates,
// order by weight descending then (subject, predicate name, object) ascending,
// keep the first k.
std::vector<Triple> select_triples(const std::vector<ConceptMatch>& matches,
                                   const std::vector<Predicate>& predicates, std::size_t k);

enum class RenderMode { Words, Sentences };

// Words: distinct objects in order, ", "-joined, "." terminated.
// Sentences: one templated sentence per triple, space-joined.
ContextText render(const std::vector<Triple>& triples, RenderMode mode);

std::string render_sentence(const Triple& triple);

const std::set<std::string>& default_stopwords();

// Stopwords plus the lowercase surface of every person tag of the record.
std::set<std::string> default_exclusions(const EventRecord& record);

}  // namespace ctxprompt
