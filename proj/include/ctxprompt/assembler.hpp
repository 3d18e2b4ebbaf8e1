#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxprompt/context.hpp"
#include "ctxprompt/dataset.hpp"
#include "ctxprompt/error.hpp"

namespace ctxprompt {

// Word-level vocabulary. Ids 0..6 are reserved for the special tokens below;
// corpus tokens follow in first-occurrence order.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnknown = 1;
  static constexpr int kBegin = 2;
  static constexpr int kEnd = 3;
  static constexpr int kIntent = 4;
  static constexpr int kBefore = 5;
  static constexpr int kAfter = 6;
  static constexpr int kNumSpecial = 7;

  // Tokens seen fewer than min_count times are left out (they encode as unknown).
  static Tokenizer build(const std::vector<std::string>& corpus, std::size_t min_count = 1);

  std::size_t size() const { return tokens_.size(); }
  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t count(int id) const { return counts_.at(static_cast<std::size_t>(id)); }
  bool is_special(int id) const { return id >= 0 && id < kNumSpecial; }

  std::vector<int> encode(std::string_view text) const;
  // Space-joined token strings; special tokens are skipped.
  std::string decode(std::span<const int> ids) const;

  static int relation_marker(Relation r);

  // "token<TAB>id<TAB>count" per line, ids ascending.
  std::string dump() const;
  std::uint64_t hash() const;
  void save(const std::filesystem::path& path) const;
  static Tokenizer load(const std::filesystem::path& path);

  friend bool operator==(const Tokenizer& a, const Tokenizer& b) {
    return a.tokens_ == b.tokens_ && a.counts_ == b.counts_;
  }

 private:
  Tokenizer();
  void add(std::string token, std::size_t count);

  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, int> ids_;
};

enum class SpanLabel { Visual, Event, Place, Context, RelationPrompt, Inference };

std::string_view span_label_name(SpanLabel label);

struct PromptSequence {
  std::vector<int> tokens;
  std::vector<SpanLabel> spans;
  std::optional<std::vector<double>> visual;
  Relation relation = Relation::Intent;

  std::size_t size() const { return tokens.size(); }
  bool has_inference() const;
  std::size_t span_length(SpanLabel label) const;
  // Tokens carrying the given label, in order.
  std::vector<int> span_tokens(SpanLabel label) const;
};

// Throws ValidationError when |tokens| != |spans| or span blocks are out of order.
void check_sequence(const PromptSequence& seq);

struct PromptPlan {
  std::vector<ProviderKind> train_chain;
  std::vector<ProviderKind> infer_chain;  // empty: no validation prompt (NVP)
};

enum class ContextPosition { AfterPlace, BeforeEvent };

struct AssemblyOptions {
  ContextPosition context_position = ContextPosition::AfterPlace;
  std::size_t max_len = 128;
};

class SequenceTooLong : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Layout [begin:Visual][Event][Place][Context?][marker:RelationPrompt][Inference][end:Inference].
// With BeforeEvent the Context block moves in front of Event.
PromptSequence assemble_training(const EventRecord& record, const ContextText& context,
                                 Relation relation, const std::string& reference,
                                 const Tokenizer& tokenizer, const AssemblyOptions& options = {});

// Same layout built from plan.infer_chain, ending at the relation marker.
PromptSequence assemble_prefix(const EventRecord& record, const PromptPlan& plan, Relation relation,
                               const ContextResources& resources, const Tokenizer& tokenizer,
                               const AssemblyOptions& options = {});

// Prefix from an already built context.
PromptSequence assemble_prefix(const EventRecord& record, const ContextText& context,
                               Relation relation, const Tokenizer& tokenizer,
                               const AssemblyOptions& options = {});

}  // namespace ctxprompt
