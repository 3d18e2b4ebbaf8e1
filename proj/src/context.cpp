#include "ctxprompt/context.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "ctxprompt/error.hpp"
#include "ctxprompt/text.hpp"

namespace ctxprompt {

namespace {

constexpr std::pair<ProviderKind, std::string_view> kAbbrevs[] = {
    {ProviderKind::ConceptWords, "CW"},      {ProviderKind::ConceptSentences, "CS"},
    {ProviderKind::PlaceConceptWords, "PCW"}, {ProviderKind::Synonyms, "Syns"},
    {ProviderKind::Captions, "C"},           {ProviderKind::FacialExpressions, "FE"},
};

std::string sentence_terminated(std::string s) {
  s = text::trim(s);
  if (!s.empty() && s.back() != '.') s += '.';
  return s;
}

}  // namespace

std::string_view provider_abbrev(ProviderKind kind) {
  for (const auto& [k, a] : kAbbrevs) {
    if (k == kind) return a;
  }
  return "?";
}

std::optional<ProviderKind> parse_provider(std::string_view abbrev) {
  for (const auto& [k, a] : kAbbrevs) {
    if (a == abbrev) return k;
  }
  return std::nullopt;
}

const std::set<std::string>& emotion_labels() {
  static const std::set<std::string> kLabels = {"angry",   "disgust", "fear",    "happy",
                                                "neutral", "sad",     "surprise"};
  return kLabels;
}

CaptionSidecar load_captions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open caption sidecar " + path.string());
  CaptionSidecar out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), line_no, "expected image_id<TAB>caption");
    const auto id = text::trim(line.substr(0, tab));
    const auto caption = text::trim(line.substr(tab + 1));
    if (id.empty() || caption.empty()) throw ParseError(path.string(), line_no, "empty image_id or caption");
    if (!out.captions.emplace(id, caption).second) {
      throw ParseError(path.string(), line_no, "duplicate image_id '" + id + "'");
    }
  }
  return out;
}

FESidecar load_emotions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open facial-expression sidecar " + path.string());
  FESidecar out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(line, ',');
    if (line_no == 1 && text::trim(cells[0]) == "image_id") continue;
    if (cells.size() != 3) throw ParseError(path.string(), line_no, "expected image_id,person_id,emotion");
    const auto id = text::trim(cells[0]);
    const auto person = text::trim(cells[1]);
    const auto emotion = text::to_lower(text::trim(cells[2]));
    int tag = 0;
    try {
      std::size_t used = 0;
      tag = std::stoi(person, &used);
      if (used != person.size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw ParseError(path.string(), line_no, "person_id '" + person + "' is not an integer");
    }
    if (tag < 1) throw ParseError(path.string(), line_no, "person_id must be positive");
    if (!emotion_labels().contains(emotion)) {
      throw ParseError(path.string(), line_no, "unknown emotion '" + emotion + "'");
    }
    if (!out.labels.emplace(std::make_pair(id, tag), emotion).second) {
      throw ParseError(path.string(), line_no, "duplicate (image_id, person_id)");
    }
  }
  return out;
}

SynonymLexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open synonym lexicon " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  if (!doc.is_object()) throw ParseError(path.string(), 0, "lexicon must be a JSON object");
  SynonymLexicon out;
  for (const auto& [key, value] : doc.items()) {
    const auto phrase = canonical_phrase(key);
    if (!value.is_array()) throw ParseError(path.string(), 0, "synonyms of '" + key + "' must be an array");
    std::vector<std::string> synonyms;
    for (const auto& v : value) {
      if (!v.is_string()) throw ParseError(path.string(), 0, "synonyms of '" + key + "' must be strings");
      const auto syn = canonical_phrase(v.get<std::string>());
      if (syn == phrase) throw ParseError(path.string(), 0, "'" + key + "' lists itself as a synonym");
      if (syn.empty()) throw ParseError(path.string(), 0, "empty synonym for '" + key + "'");
      synonyms.push_back(syn);
    }
    out.entries[phrase] = std::move(synonyms);
  }
  return out;
}

ContextText caption_context(const EventRecord& record, const CaptionSidecar& sidecar) {
  ContextText out;
  out.kind = ProviderKind::Captions;
  auto it = sidecar.captions.find(record.image_id);
  if (it == sidecar.captions.end()) return out;
  out.text = sentence_terminated(it->second);
  if (!out.text.empty()) out.provenance.push_back({ProviderKind::Captions, "caption:" + record.image_id});
  return out;
}

ContextText facial_expression_context(const EventRecord& record, const FESidecar& sidecar) {
  ContextText out;
  out.kind = ProviderKind::FacialExpressions;
  std::vector<std::string> sentences;
  for (const auto& person : persons_in_text(record.event_text)) {
    auto it = sidecar.labels.find({record.image_id, person.id});
    if (it == sidecar.labels.end()) continue;
    sentences.push_back(person.surface() + " looks " + it->second + ".");
    out.provenance.push_back({ProviderKind::FacialExpressions,
                              record.image_id + "/" + person.surface() + ":" + it->second});
  }
  out.text = text::join(sentences, " ");
  return out;
}

std::vector<std::string> parse_word_list(const std::string& words_text) {
  std::string body = text::trim(words_text);
  if (!body.empty() && body.back() == '.') body.pop_back();
  std::vector<std::string> phrases;
  for (const auto& part : text::split(body, ',')) {
    auto p = text::trim(part);
    if (!p.empty()) phrases.push_back(std::move(p));
  }
  return phrases;
}

std::string format_word_list(const std::vector<std::string>& phrases) {
  if (phrases.empty()) return {};
  return text::join(phrases, ", ") + ".";
}

namespace {

// Phrases added by the lexicon, in source order.
std::vector<std::string> synonym_additions(const std::vector<std::string>& phrases,
                                           const SynonymLexicon& lexicon) {
  std::vector<std::string> all = phrases;
  std::vector<std::string> added;
  for (const auto& p : phrases) {
    auto it = lexicon.entries.find(canonical_phrase(p));
    if (it == lexicon.entries.end() || it->second.empty()) continue;
    const auto& top = it->second.front();
    if (std::find(all.begin(), all.end(), top) != all.end()) continue;
    all.push_back(top);
    added.push_back(top);
  }
  return added;
}

}  // namespace

ContextText synonym_context(const ContextText& concept_words, const SynonymLexicon& lexicon) {
  if (concept_words.kind != ProviderKind::ConceptWords &&
      concept_words.kind != ProviderKind::PlaceConceptWords) {
    throw ValidationError("synonym_context expects a concept-words context");
  }
  auto phrases = parse_word_list(concept_words.text);
  const auto added = synonym_additions(phrases, lexicon);
  ContextText out;
  out.kind = ProviderKind::Synonyms;
  out.provenance = concept_words.provenance;
  for (const auto& a : added) {
    phrases.push_back(a);
    out.provenance.push_back({ProviderKind::Synonyms, "synonym:" + a});
  }
  out.text = format_word_list(phrases);
  return out;
}

ContextText concept_context(const EventRecord& record, const ContextResources& resources,
                            ProviderKind kind) {
  ContextText empty;
  empty.kind = kind;
  if (resources.graph == nullptr) return empty;
  const bool place = kind == ProviderKind::PlaceConceptWords;
  const auto& source = place ? record.place_text : record.event_text;
  const auto& predicates =
      place && resources.place_predicates ? *resources.place_predicates : resources.predicates;
  const std::size_t k = place && resources.place_k ? *resources.place_k : resources.k;
  const auto matches = match_concepts(source, *resources.graph, default_exclusions(record));
  const auto triples = select_triples(matches, predicates, k);
  auto out = render(triples, kind == ProviderKind::ConceptSentences ? RenderMode::Sentences
                                                                   : RenderMode::Words);
  out.kind = kind;
  for (auto& p : out.provenance) p.kind = kind;
  return out;
}

ContextText provide(const EventRecord& record, ProviderKind kind,
                    const ContextResources& resources) {
  switch (kind) {
    case ProviderKind::ConceptWords:
    case ProviderKind::ConceptSentences:
    case ProviderKind::PlaceConceptWords:
      return concept_context(record, resources, kind);
    case ProviderKind::Captions:
      if (resources.captions == nullptr) return ContextText{{}, kind, {}};
      return caption_context(record, *resources.captions);
    case ProviderKind::FacialExpressions:
      if (resources.emotions == nullptr) return ContextText{{}, kind, {}};
      return facial_expression_context(record, *resources.emotions);
    case ProviderKind::Synonyms: {
      ContextText out{{}, kind, {}};
      if (resources.lexicon == nullptr) return out;
      const auto words = concept_context(record, resources, ProviderKind::ConceptWords);
      const auto added = synonym_additions(parse_word_list(words.text), *resources.lexicon);
      for (const auto& a : added) out.provenance.push_back({kind, "synonym:" + a});
      out.text = format_word_list(added);
      return out;
    }
  }
  return ContextText{{}, kind, {}};
}

void check_chain(const std::vector<ProviderKind>& chain) {
  for (std::size_t i = 0; i < chain.size(); ++i) {
    for (std::size_t j = i + 1; j < chain.size(); ++j) {
      if (chain[i] == chain[j]) {
        throw ValidationError("context chain repeats provider " +
                              std::string(provider_abbrev(chain[i])));
      }
    }
  }
}

ContextText build_context_chain(const EventRecord& record, const std::vector<ProviderKind>& chain,
                                const ContextResources& resources) {
  check_chain(chain);
  ContextText out;
  std::vector<std::string> fragments;
  for (auto kind : chain) {
    auto piece = provide(record, kind, resources);
    if (piece.empty()) continue;
    fragments.push_back(piece.text);
    out.provenance.insert(out.provenance.end(), piece.provenance.begin(), piece.provenance.end());
  }
  out.text = text::join(fragments, " ");
  return out;
}

std::string chain_label(const std::vector<ProviderKind>& chain) {
  if (chain.empty()) return "None";
  std::vector<std::string> parts;
  for (auto k : chain) parts.emplace_back(provider_abbrev(k));
  return text::join(parts, " + ");
}

std::vector<ProviderKind> parse_chain(const std::string& label) {
  const auto trimmed = text::trim(label);
  std::vector<ProviderKind> chain;
  if (trimmed.empty() || trimmed == "None") return chain;
  for (const auto& part : text::split(trimmed, '+')) {
    const auto name = text::trim(part);
    auto kind = parse_provider(name);
    if (!kind) throw ConfigError("unknown context provider '" + name + "'");
    chain.push_back(*kind);
  }
  check_chain(chain);
  return chain;
}

}  // namespace ctxprompt
