#include "ctxprompt/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

#include "ctxprompt/dataset.hpp"
#include "ctxprompt/error.hpp"
#include "ctxprompt/text.hpp"

namespace ctxprompt {

namespace {

struct KnownPredicate {
  std::string_view name;
  Predicate::Kind kind;
};

constexpr KnownPredicate kKnown[] = {
    {"AtLocation", Predicate::Kind::AtLocation}, {"CapableOf", Predicate::Kind::CapableOf},
    {"HasA", Predicate::Kind::HasA},             {"HasProperty", Predicate::Kind::HasProperty},
    {"IsA", Predicate::Kind::IsA},               {"PartOf", Predicate::Kind::PartOf},
};

}  // namespace

Predicate Predicate::from_name(std::string_view name) {
  for (const auto& k : kKnown) {
    if (k.name == name) return Predicate(k.kind);
  }
  Predicate p(Kind::Other);
  p.other_ = std::string(name);
  return p;
}

std::string Predicate::name() const {
  for (const auto& k : kKnown) {
    if (k.kind == kind_) return std::string(k.name);
  }
  return other_;
}

std::string Triple::to_string() const {
  std::ostringstream out;
  out << subject << ',' << predicate.name() << ',' << object << ',' << weight;
  return out.str();
}

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples) : triples_(std::move(triples)) {
  for (std::size_t i = 0; i < triples_.size(); ++i) {
    const auto& subject = triples_[i].subject;
    index_[subject].push_back(i);
    if (subjects_.insert(subject).second) {
      max_subject_words_ = std::max(max_subject_words_, text::word_spans(subject).size());
    }
  }
}

const std::vector<std::size_t>& KnowledgeGraph::by_subject(const std::string& phrase) const {
  static const std::vector<std::size_t> kNone;
  auto it = index_.find(phrase);
  return it == index_.end() ? kNone : it->second;
}

std::string canonical_phrase(std::string_view raw) {
  std::string s = text::to_lower(raw);
  std::replace(s.begin(), s.end(), '_', ' ');
  std::istringstream in(s);
  std::string word;
  std::vector<std::string> words;
  while (in >> word) words.push_back(word);
  return text::join(words, " ");
}

KnowledgeGraph parse_graph(std::istream& in, const std::string& source) {
  std::vector<Triple> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(line, ',');
    if (line_no == 1 && text::trim(cells[0]) == "subject") continue;
    if (cells.size() != 4) {
      throw ParseError(source, line_no,
                       "expected 4 comma-separated columns, got " + std::to_string(cells.size()));
    }
    Triple t;
    t.subject = canonical_phrase(cells[0]);
    const std::string predicate = text::trim(cells[1]);
    t.object = canonical_phrase(cells[2]);
    if (t.subject.empty() || predicate.empty() || t.object.empty()) {
      throw ParseError(source, line_no, "empty subject, predicate or object");
    }
    t.predicate = Predicate::from_name(predicate);
    const std::string weight = text::trim(cells[3]);
    try {
      std::size_t used = 0;
      t.weight = std::stod(weight, &used);
      if (used != weight.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::logic_error&) {
      throw ParseError(source, line_no, "weight '" + weight + "' is not a number");
    }
    if (!std::isfinite(t.weight)) throw ParseError(source, line_no, "weight is not finite");
    if (t.weight < 0.0) throw ParseError(source, line_no, "negative weight " + weight);
    const auto kind = t.predicate.kind();
    if ((kind == Predicate::Kind::IsA || kind == Predicate::Kind::PartOf) &&
        t.subject == t.object) {
      throw ParseError(source, line_no, "reflexive " + predicate + " triple");
    }
    triples.push_back(std::move(t));
  }
  return KnowledgeGraph(std::move(triples));
}

KnowledgeGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open graph file " + path.string());
  return parse_graph(in, path.string());
}

std::vector<ConceptMatch> match_concepts(std::string_view source, const KnowledgeGraph& graph,
                                         const std::set<std::string>& exclusions) {
  std::vector<ConceptMatch> matches;
  if (graph.empty()) return matches;
  const auto words = text::word_spans(source);
  const std::size_t max_words = graph.max_subject_words();
  std::size_t i = 0;
  while (i < words.size()) {
    const std::size_t last = std::min(words.size(), i + max_words) - 1;
    bool found = false;
    for (std::size_t j = last + 1; j-- > i;) {
      const auto start = words[i].start;
      const auto end = words[j].end;
      const std::string phrase = text::to_lower(source.substr(start, end - start));
      if (!graph.has_subject(phrase) || exclusions.contains(phrase)) continue;
      ConceptMatch m;
      m.surface = std::string(source.substr(start, end - start));
      m.start = start;
      m.end = end;
      for (auto idx : graph.by_subject(phrase)) m.triples.push_back(graph.triples()[idx]);
      matches.push_back(std::move(m));
      i = j + 1;
      found = true;
      break;
    }
    if (!found) ++i;
  }
  return matches;
}

std::vector<Triple> select_triples(const std::vector<ConceptMatch>& matches,
                                   const std::vector<Predicate>& predicates, std::size_t k) {
  std::vector<Triple> pool;
  for (const auto& m : matches) {
    for (const auto& t : m.triples) {
      if (std::find(predicates.begin(), predicates.end(), t.predicate) == predicates.end()) {
        continue;
      }
      if (std::find(pool.begin(), pool.end(), t) == pool.end()) pool.push_back(t);
    }
  }
  std::sort(pool.begin(), pool.end(), [](const Triple& a, const Triple& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return std::forward_as_tuple(a.subject, a.predicate.name(), a.object) <
           std::forward_as_tuple(b.subject, b.predicate.name(), b.object);
  });
  if (pool.size() > k) pool.resize(k);
  return pool;
}

std::string render_sentence(const Triple& t) {
  const auto& s = t.subject;
  const auto& o = t.object;
  switch (t.predicate.kind()) {
    case Predicate::Kind::HasProperty: return s + " is " + o + ".";
    case Predicate::Kind::IsA: return s + " is a " + o + ".";
    case Predicate::Kind::PartOf: return s + " is a part of " + o + ".";
    case Predicate::Kind::HasA: return s + " has " + o + ".";
    case Predicate::Kind::CapableOf: return s + " can " + o + ".";
    case Predicate::Kind::AtLocation: return s + " can be found at " + o + ".";
    case Predicate::Kind::Other: return s + " " + t.predicate.name() + " " + o + ".";
  }
  return s + " " + o + ".";
}

ContextText render(const std::vector<Triple>& triples, RenderMode mode) {
  const auto kind =
      mode == RenderMode::Words ? ProviderKind::ConceptWords : ProviderKind::ConceptSentences;
  ContextText out;
  out.kind = kind;
  if (triples.empty()) return out;
  std::vector<std::string> parts;
  for (const auto& t : triples) {
    out.provenance.push_back({kind, t.to_string()});
    if (mode == RenderMode::Sentences) {
      parts.push_back(render_sentence(t));
    } else if (std::find(parts.begin(), parts.end(), t.object) == parts.end()) {
      parts.push_back(t.object);
    }
  }
  out.text = mode == RenderMode::Sentences ? text::join(parts, " ") : text::join(parts, ", ") + ".";
  return out;
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> kStopwords = {
      "a",     "an",    "the",   "and",   "or",    "but",  "if",    "of",   "at",   "by",
      "for",   "with",  "about", "to",    "from",  "in",   "on",    "up",   "down", "out",
      "over",  "under", "is",    "are",   "was",   "were", "be",    "been", "being", "has",
      "have",  "had",   "do",    "does",  "did",   "he",   "she",   "it",   "they", "them",
      "his",   "her",   "its",   "their", "this",  "that", "these", "those", "while", "into",
  };
  return kStopwords;
}

std::set<std::string> default_exclusions(const EventRecord& record) {
  auto out = default_stopwords();
  for (const auto& p : record.persons) out.insert(text::to_lower(p.surface()));
  for (const auto& p : persons_in_text(record.event_text)) out.insert(text::to_lower(p.surface()));
  return out;
}

}  // namespace ctxprompt
