#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctxprompt {

enum class ProviderKind {
  ConceptWords,
  ConceptSentences,
  PlaceConceptWords,
  Synonyms,
  Captions,
  FacialExpressions,
};

// Short labels: CW, CS, PCW, Syns, C, FE.
std::string_view provider_abbrev(ProviderKind kind);
std::optional<ProviderKind> parse_provider(std::string_view abbrev);

struct ProvenanceEntry {
  ProviderKind kind;
  std::string note;  // triple, caption id or emotion label that produced text
  friend bool operator==(const ProvenanceEntry&, const ProvenanceEntry&) = default;
};

// One provider's rendered context (kind set) or a concatenated chain (kind unset).
// text is empty or ends in a sentence terminator.
struct ContextText {
  std::string text;
  std::optional<ProviderKind> kind;
  std::vector<ProvenanceEntry> provenance;

  bool empty() const { return text.empty(); }
};

}  // namespace ctxprompt
