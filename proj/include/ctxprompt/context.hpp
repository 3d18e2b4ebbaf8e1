#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ctxprompt/context_text.hpp"
#include "ctxprompt/dataset.hpp"
#include "ctxprompt/knowledge.hpp"

namespace ctxprompt {

// image_id -> caption
struct CaptionSidecar {
  std::map<std::string, std::string> captions;
};

// (image_id, person id) -> emotion label
struct FESidecar {
  std::map<std::pair<std::string, int>, std::string> labels;
};

// phrase -> ranked synonyms
struct SynonymLexicon {
  std::map<std::string, std::vector<std::string>> entries;
};

const std::set<std::string>& emotion_labels();

// Caption sidecar: one "image_id<TAB>caption" per line.
CaptionSidecar load_captions(const std::filesystem::path& path);
// FE sidecar: CSV rows image_id,person_id,emotion; optional header starting "image_id".
FESidecar load_emotions(const std::filesystem::path& path);
// Lexicon: JSON object mapping phrase -> array of phrases.
SynonymLexicon load_lexicon(const std::filesystem::path& path);

struct ContextResources {
  const KnowledgeGraph* graph = nullptr;
  const CaptionSidecar* captions = nullptr;
  const FESidecar* emotions = nullptr;
  const SynonymLexicon* lexicon = nullptr;
  std::vector<Predicate> predicates = {Predicate(Predicate::Kind::HasProperty),
                                       Predicate(Predicate::Kind::PartOf)};
  std::size_t k = 5;
  // PlaceConceptWords falls back to predicates / k when unset.
  std::optional<std::vector<Predicate>> place_predicates;
  std::optional<std::size_t> place_k;
};

ContextText caption_context(const EventRecord& record, const CaptionSidecar& sidecar);
ContextText facial_expression_context(const EventRecord& record, const FESidecar& sidecar);

// concept_words must be a ConceptWords or PlaceConceptWords rendering.
ContextText synonym_context(const ContextText& concept_words, const SynonymLexicon& lexicon);

ContextText concept_context(const EventRecord& record, const ContextResources& resources,
                            ProviderKind kind);

// Runs one provider. Missing resources yield an empty ContextText. Inside a
// chain the Synonyms provider contributes only the synonyms it adds.
ContextText provide(const EventRecord& record, ProviderKind kind,
                    const ContextResources& resources);

ContextText build_context_chain(const EventRecord& record, const std::vector<ProviderKind>& chain,
                                const ContextResources& resources);

// Phrases of a Words rendering ("a, b." -> {a, b}).
std::vector<std::string> parse_word_list(const std::string& words_text);
std::string format_word_list(const std::vector<std::string>& phrases);

// Throws ValidationError when chain repeats a kind.
void check_chain(const std::vector<ProviderKind>& chain);

// "CW + C + FE" style labels; empty chain renders as "None".
std::string chain_label(const std::vector<ProviderKind>& chain);
std::vector<ProviderKind> parse_chain(const std::string& label);

}  // namespace ctxprompt
