#include "ctxprompt/assembler.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ctxprompt/error.hpp"
#include "ctxprompt/rng.hpp"
#include "ctxprompt/text.hpp"

namespace ctxprompt {

Tokenizer::Tokenizer() {
  for (const char* s : {"<pad>", "<unk>", "<s>", "</s>", "<intent>", "<before>", "<after>"}) {
    add(s, 0);
  }
}

void Tokenizer::add(std::string token, std::size_t count) {
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
}

Tokenizer Tokenizer::build(const std::vector<std::string>& corpus, std::size_t min_count) {
  if (corpus.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& line : corpus) {
    for (auto& tok : text::tokenize(line)) {
      auto [it, fresh] = counts.try_emplace(tok, 0);
      ++it->second;
      if (fresh) order.push_back(std::move(tok));
    }
  }
  Tokenizer t;
  for (auto& tok : order) {
    const auto c = counts.at(tok);
    if (c >= min_count) t.add(std::move(tok), c);
  }
  return t;
}

int Tokenizer::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnknown : it->second;
}

std::vector<int> Tokenizer::encode(std::string_view s) const {
  std::vector<int> ids;
  for (const auto& tok : text::tokenize(s)) {
    ids.push_back(id(tok));
  }
  return ids;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
  std::vector<std::string> parts;
  for (int i : ids) {
    if (is_special(i) && i != kUnknown) continue;
    parts.push_back(token(i));
  }
  return text::join(parts, " ");
}

int Tokenizer::relation_marker(Relation r) {
  switch (r) {
    case Relation::Intent: return kIntent;
    case Relation::Before: return kBefore;
    case Relation::After: return kAfter;
  }
  return kIntent;
}

std::string Tokenizer::dump() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\t' << i << '\t' << counts_[i] << '\n';
  }
  return out.str();
}

std::uint64_t Tokenizer::hash() const { return fnv1a64(dump()); }

void Tokenizer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write vocabulary " + path.string());
  out << dump();
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vocabulary " + path.string());
  Tokenizer t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = text::split(line, '\t');
    if (cells.size() != 3) throw ParseError(path.string(), line_no, "expected token<TAB>id<TAB>count");
    std::size_t id = 0;
    std::size_t count = 0;
    try {
      id = std::stoul(cells[1]);
      count = std::stoul(cells[2]);
    } catch (const std::logic_error&) {
      throw ParseError(path.string(), line_no, "bad id or count");
    }
    if (id < kNumSpecial) {
      if (t.tokens_[id] != cells[0]) throw ParseError(path.string(), line_no, "special token mismatch");
      continue;
    }
    if (id != t.tokens_.size()) throw ParseError(path.string(), line_no, "ids must be dense and ascending");
    t.add(cells[0], count);
  }
  return t;
}

std::string_view span_label_name(SpanLabel label) {
  switch (label) {
    case SpanLabel::Visual: return "Visual";
    case SpanLabel::Event: return "Event";
    case SpanLabel::Place: return "Place";
    case SpanLabel::Context: return "Context";
    case SpanLabel::RelationPrompt: return "RelationPrompt";
    case SpanLabel::Inference: return "Inference";
  }
  return "?";
}

bool PromptSequence::has_inference() const {
  return std::find(spans.begin(), spans.end(), SpanLabel::Inference) != spans.end();
}

std::size_t PromptSequence::span_length(SpanLabel label) const {
  return static_cast<std::size_t>(std::count(spans.begin(), spans.end(), label));
}

std::vector<int> PromptSequence::span_tokens(SpanLabel label) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (spans[i] == label) out.push_back(tokens[i]);
  }
  return out;
}

void check_sequence(const PromptSequence& seq) {
  if (seq.tokens.size() != seq.spans.size()) {
    throw ValidationError("token and span label counts differ");
  }
  // Each label forms at most one contiguous block.
  std::vector<SpanLabel> blocks;
  for (std::size_t i = 0; i < seq.spans.size(); ++i) {
    if (i == 0 || seq.spans[i] != seq.spans[i - 1]) {
      if (std::find(blocks.begin(), blocks.end(), seq.spans[i]) != blocks.end()) {
        throw ValidationError("span block " + std::string(span_label_name(seq.spans[i])) +
                              " is not contiguous");
      }
      blocks.push_back(seq.spans[i]);
    }
  }
  const auto pos = [&](SpanLabel l) {
    return std::find(blocks.begin(), blocks.end(), l) - blocks.begin();
  };
  const auto n = static_cast<std::ptrdiff_t>(blocks.size());
  if (pos(SpanLabel::Event) == n || pos(SpanLabel::RelationPrompt) == n) {
    throw ValidationError("sequence lacks an Event or RelationPrompt block");
  }
  if (pos(SpanLabel::Visual) != n && pos(SpanLabel::Visual) != 0) {
    throw ValidationError("Visual block must come first");
  }
  if (pos(SpanLabel::Event) > pos(SpanLabel::RelationPrompt) ||
      (pos(SpanLabel::Place) != n && pos(SpanLabel::Place) > pos(SpanLabel::RelationPrompt)) ||
      (pos(SpanLabel::Context) != n && pos(SpanLabel::Context) > pos(SpanLabel::RelationPrompt))) {
    throw ValidationError("RelationPrompt must follow Event, Place and Context");
  }
  if (pos(SpanLabel::Inference) != n && pos(SpanLabel::Inference) != n - 1) {
    throw ValidationError("Inference block must come last");
  }
}

namespace {

PromptSequence assemble(const EventRecord& record, const ContextText& context, Relation relation,
                        const std::string* reference, const Tokenizer& tokenizer,
                        const AssemblyOptions& options) {
  PromptSequence seq;
  seq.relation = relation;
  const auto append = [&](const std::vector<int>& ids, SpanLabel label) {
    seq.tokens.insert(seq.tokens.end(), ids.begin(), ids.end());
    seq.spans.insert(seq.spans.end(), ids.size(), label);
  };
  const auto event = tokenizer.encode(record.event_text);
  const auto place = tokenizer.encode(record.place_text);
  const auto ctx = tokenizer.encode(context.text);
  append({Tokenizer::kBegin}, SpanLabel::Visual);
  if (options.context_position == ContextPosition::BeforeEvent) append(ctx, SpanLabel::Context);
  append(event, SpanLabel::Event);
  append(place, SpanLabel::Place);
  if (options.context_position == ContextPosition::AfterPlace) append(ctx, SpanLabel::Context);
  append({Tokenizer::relation_marker(relation)}, SpanLabel::RelationPrompt);
  std::size_t inference_len = 0;
  if (reference != nullptr) {
    auto inf = tokenizer.encode(*reference);
    inf.push_back(Tokenizer::kEnd);
    inference_len = inf.size();
    append(inf, SpanLabel::Inference);
  }
  if (seq.tokens.size() > options.max_len) {
    std::ostringstream msg;
    msg << "record '" << record.record_id << "' " << relation_name(relation) << ": sequence length "
        << seq.tokens.size() << " exceeds max_len " << options.max_len << " (Visual 1, Event "
        << event.size() << ", Place " << place.size() << ", Context " << ctx.size()
        << ", RelationPrompt 1, Inference " << inference_len << ")";
    throw SequenceTooLong(msg.str());
  }
  return seq;
}

}  // namespace

PromptSequence assemble_training(const EventRecord& record, const ContextText& context,
                                 Relation relation, const std::string& reference,
                                 const Tokenizer& tokenizer, const AssemblyOptions& options) {
  return assemble(record, context, relation, &reference, tokenizer, options);
}

PromptSequence assemble_prefix(const EventRecord& record, const ContextText& context,
                               Relation relation, const Tokenizer& tokenizer,
                               const AssemblyOptions& options) {
  return assemble(record, context, relation, nullptr, tokenizer, options);
}

PromptSequence assemble_prefix(const EventRecord& record, const PromptPlan& plan, Relation relation,
                               const ContextResources& resources, const Tokenizer& tokenizer,
                               const AssemblyOptions& options) {
  const auto context = build_context_chain(record, plan.infer_chain, resources);
  return assemble_prefix(record, context, relation, tokenizer, options);
}

}  // namespace ctxprompt
