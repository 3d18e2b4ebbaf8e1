#include "ctxprompt/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ctxprompt/checkpoint.hpp"
#include "ctxprompt/rng.hpp"
#include "ctxprompt/text.hpp"

namespace ctxprompt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
    const auto v = std::stoull(value, &used, 0);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + value + "'");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const auto v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const auto v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument("bad");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  }
}

std::vector<Predicate> parse_predicates(const std::string& value) {
  std::vector<Predicate> out;
  for (const auto& part : text::split(value, ',')) {
    const auto name = text::trim(part);
    if (!name.empty()) out.push_back(Predicate::from_name(name));
  }
  if (out.empty()) throw ConfigError("predicate list is empty");
  return out;
}

std::string format_predicates(const std::vector<Predicate>& preds) {
  std::vector<std::string> names;
  for (const auto& p : preds) names.push_back(p.name());
  return text::join(names, ",");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string position_name(ContextPosition p) {
  return p == ContextPosition::AfterPlace ? "after_place" : "before_event";
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string ids_text(const std::vector<EventRecord>& records) {
  std::string out;
  for (const auto& r : records) out += r.record_id + "\n";
  return out;
}

// Picks `size` records by seed; returns (picked, rest), each in input order.
std::pair<std::vector<EventRecord>, std::vector<EventRecord>> carve(
    const std::vector<EventRecord>& records, std::size_t size, std::uint64_t seed) {
  const auto idx = subsample_indices(records.size(), SubsampleSpec::count(size, seed));
  std::vector<char> picked(records.size(), 0);
  for (auto i : idx) picked[i] = 1;
  std::pair<std::vector<EventRecord>, std::vector<EventRecord>> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (picked[i] ? out.first : out.second).push_back(records[i]);
  }
  return out;
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    out += (std::isalnum(u) || c == '-' || c == '_') ? c : '_';
  }
  return out.empty() ? "row" : out;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"name", "row name used in grid output"},
      {"records", "training record file (JSON lines)"},
      {"eval_records", "separate evaluation record file; empty carves the slice from records"},
      {"eval_size", "number of evaluation records"},
      {"graph", "knowledge edge list (CSV)"},
      {"captions", "caption sidecar (TSV)"},
      {"emotions", "facial-expression sidecar (CSV)"},
      {"lexicon", "synonym lexicon (JSON)"},
      {"visual", "visual feature sidecar (TSV)"},
      {"train_chain", "context providers for training sequences, e.g. 'CW + C + FE' or 'None'"},
      {"infer_chain", "context providers for generation prefixes"},
      {"predicates", "comma-separated predicates for concept providers"},
      {"k", "triples kept per record"},
      {"place_predicates", "predicates for place concept words"},
      {"place_k", "triples kept for place concept words"},
      {"context_position", "after_place or before_event"},
      {"subsample", "training budget, 'count:N' or 'fraction:F'"},
      {"min_count", "minimum token count kept in the vocabulary"},
      {"layers", "transformer blocks"},
      {"heads", "attention heads"},
      {"embed_dim", "embedding width"},
      {"max_len", "maximum sequence length"},
      {"visual_dim", "visual feature width"},
      {"mlp_ratio", "MLP hidden width as a multiple of embed_dim"},
      {"optimizer", "sgd or adam"},
      {"learning_rate", "step size"},
      {"batch_size", "sequences per update"},
      {"clip_norm", "global gradient norm clip (0 disables)"},
      {"epochs", "training epochs"},
      {"p", "nucleus mass"},
      {"num_samples", "generations per record and relation"},
      {"max_new_tokens", "generation length cap"},
      {"aggregate", "mean or max over samples"},
      {"bleu_smoothing", "epsilon for zero BLEU counts (0 disables)"},
      {"out", "output directory"},
      {"seed", "global seed"},
  };
  return keys;
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const auto value = text::trim(raw);
  if (key == "name") name = value;
  else if (key == "records") records = value;
  else if (key == "eval_records") eval_records = value;
  else if (key == "eval_size") eval_size = parse_u64(key, value);
  else if (key == "graph") graph = value;
  else if (key == "captions") captions = value;
  else if (key == "emotions") emotions = value;
  else if (key == "lexicon") lexicon = value;
  else if (key == "visual") visual = value;
  else if (key == "train_chain") plan.train_chain = parse_chain(value);
  else if (key == "infer_chain") plan.infer_chain = parse_chain(value);
  else if (key == "predicates") predicates = parse_predicates(value);
  else if (key == "k") k = parse_u64(key, value);
  else if (key == "place_predicates") {
    if (value.empty()) place_predicates.reset();
    else place_predicates = parse_predicates(value);
  } else if (key == "place_k") {
    if (value.empty()) place_k.reset();
    else place_k = parse_u64(key, value);
  } else if (key == "context_position") {
    if (value == "after_place") context_position = ContextPosition::AfterPlace;
    else if (value == "before_event") context_position = ContextPosition::BeforeEvent;
    else throw ConfigError("context_position must be after_place or before_event, got '" + value + "'");
  } else if (key == "subsample") {
    SubsampleSpec::parse(value, 0);
    subsample = value;
  } else if (key == "min_count") min_count = parse_u64(key, value);
  else if (key == "layers") model.layers = parse_int(key, value);
  else if (key == "heads") model.heads = parse_int(key, value);
  else if (key == "embed_dim") model.embed_dim = parse_int(key, value);
  else if (key == "max_len") model.max_len = parse_int(key, value);
  else if (key == "visual_dim") model.visual_dim = parse_int(key, value);
  else if (key == "mlp_ratio") model.mlp_ratio = parse_int(key, value);
  else if (key == "optimizer") optimizer.kind = parse_optimizer(value);
  else if (key == "learning_rate") optimizer.learning_rate = parse_double(key, value);
  else if (key == "batch_size") optimizer.batch_size = parse_u64(key, value);
  else if (key == "clip_norm") optimizer.clip_norm = parse_double(key, value);
  else if (key == "epochs") epochs = parse_int(key, value);
  else if (key == "p") decode.p = parse_double(key, value);
  else if (key == "num_samples") decode.num_samples = parse_int(key, value);
  else if (key == "max_new_tokens") decode.max_new_tokens = parse_int(key, value);
  else if (key == "aggregate") {
    if (value == "mean") aggregate = Aggregate::Mean;
    else if (value == "max") aggregate = Aggregate::Max;
    else throw ConfigError("aggregate must be mean or max, got '" + value + "'");
  } else if (key == "bleu_smoothing") bleu_smoothing = parse_double(key, value);
  else if (key == "out") out = value;
  else if (key == "seed") seed = parse_u64(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void ExperimentConfig::apply(const KvSection& section) {
  for (const auto& e : section.entries) {
    try {
      set(e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
    }
  }
}

std::string ExperimentConfig::dump() const {
  std::ostringstream o;
  auto kv = [&](const std::string& k, const std::string& v) { o << k << " = " << v << "\n"; };
  kv("name", name);
  kv("records", records.string());
  kv("eval_records", eval_records.string());
  kv("eval_size", std::to_string(eval_size));
  kv("graph", graph.string());
  kv("captions", captions.string());
  kv("emotions", emotions.string());
  kv("lexicon", lexicon.string());
  kv("visual", visual.string());
  kv("train_chain", chain_label(plan.train_chain));
  kv("infer_chain", chain_label(plan.infer_chain));
  kv("predicates", format_predicates(predicates));
  kv("k", std::to_string(k));
  kv("place_predicates", place_predicates ? format_predicates(*place_predicates) : "");
  kv("place_k", place_k ? std::to_string(*place_k) : "");
  kv("context_position", position_name(context_position));
  kv("subsample", subsample);
  kv("min_count", std::to_string(min_count));
  kv("layers", std::to_string(model.layers));
  kv("heads", std::to_string(model.heads));
  kv("embed_dim", std::to_string(model.embed_dim));
  kv("max_len", std::to_string(model.max_len));
  kv("visual_dim", std::to_string(model.visual_dim));
  kv("mlp_ratio", std::to_string(model.mlp_ratio));
  kv("optimizer", optimizer_name(optimizer.kind));
  kv("learning_rate", format_double(optimizer.learning_rate));
  kv("batch_size", std::to_string(optimizer.batch_size));
  kv("clip_norm", format_double(optimizer.clip_norm));
  kv("epochs", std::to_string(epochs));
  kv("p", format_double(decode.p));
  kv("num_samples", std::to_string(decode.num_samples));
  kv("max_new_tokens", std::to_string(decode.max_new_tokens));
  kv("aggregate", aggregate == Aggregate::Mean ? "mean" : "max");
  kv("bleu_smoothing", format_double(bleu_smoothing));
  kv("out", out.string());
  kv("seed", std::to_string(seed));
  return o.str();
}

std::uint64_t ExperimentConfig::hash() const {
  ExperimentConfig copy = *this;
  copy.out.clear();
  return fnv1a64(copy.dump());
}

void ExperimentConfig::validate() const {
  auto require_file = [](const fs::path& p, const std::string& what) {
    if (p.empty()) return;
    if (!fs::is_regular_file(p)) throw ConfigError(what + " file not found: " + p.string());
  };
  if (records.empty()) throw ConfigError("'records' is required");
  require_file(records, "records");
  require_file(eval_records, "eval_records");
  require_file(graph, "graph");
  require_file(captions, "captions");
  require_file(emotions, "emotions");
  require_file(lexicon, "lexicon");
  require_file(visual, "visual");
  check_chain(plan.train_chain);
  check_chain(plan.infer_chain);
  for (const auto* chain : {&plan.train_chain, &plan.infer_chain}) {
    for (auto kind : *chain) {
      const auto label = std::string(provider_abbrev(kind));
      switch (kind) {
        case ProviderKind::ConceptWords:
        case ProviderKind::ConceptSentences:
        case ProviderKind::PlaceConceptWords:
          if (graph.empty()) throw ConfigError("provider " + label + " needs 'graph'");
          break;
        case ProviderKind::Synonyms:
          if (graph.empty() || lexicon.empty()) {
            throw ConfigError("provider " + label + " needs 'graph' and 'lexicon'");
          }
          break;
        case ProviderKind::Captions:
          if (captions.empty()) throw ConfigError("provider " + label + " needs 'captions'");
          break;
        case ProviderKind::FacialExpressions:
          if (emotions.empty()) throw ConfigError("provider " + label + " needs 'emotions'");
          break;
      }
    }
  }
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (eval_size == 0) throw ConfigError("eval_size must be > 0");
  if (k == 0) throw ConfigError("k must be > 0");
  if (optimizer.batch_size == 0) throw ConfigError("batch_size must be > 0");
  if (!(optimizer.learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (optimizer.clip_norm < 0) throw ConfigError("clip_norm must be >= 0");
  if (bleu_smoothing < 0) throw ConfigError("bleu_smoothing must be >= 0");
  SubsampleSpec::parse(subsample, 0);
  ModelConfig probe = model;
  probe.vocab_size = Tokenizer::kNumSpecial + 1;
  probe.validate();
  decode.validate();
}

ExperimentConfig ExperimentConfig::from_kv(const KvSection& section) {
  ExperimentConfig c;
  c.apply(section);
  return c;
}

void ExperimentConfig::resolve_paths(const fs::path& base) {
  for (auto* p : {&records, &eval_records, &graph, &captions, &emotions, &lexicon, &visual}) {
    if (!p->empty() && p->is_relative()) *p = (base / *p).lexically_normal();
  }
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  const auto doc = load_kv(path);
  if (!doc.sections.empty()) {
    throw ConfigError(path.string() + ": experiment config has [sections]; use it as a grid");
  }
  try {
    auto c = from_kv(doc.base);
    c.resolve_paths(path.parent_path());
    return c;
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

StageSeeds StageSeeds::from(std::uint64_t global) {
  return {derive_seed(global, "eval-split"), derive_seed(global, "subsample"),
          derive_seed(global, "init"), derive_seed(global, "shuffle"),
          derive_seed(global, "decode")};
}

VisualSidecar load_visual(const fs::path& path, int visual_dim) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  VisualSidecar out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), line_no, "expected image_id<TAB>features");
    const auto id = line.substr(0, tab);
    std::vector<double> values;
    std::istringstream fields(line.substr(tab + 1));
    std::string f;
    while (fields >> f) {
      try {
        values.push_back(std::stod(f));
      } catch (const std::exception&) {
        throw ParseError(path.string(), line_no, "bad feature value '" + f + "'");
      }
    }
    if (static_cast<int>(values.size()) != visual_dim) {
      throw ParseError(path.string(), line_no,
                       "expected " + std::to_string(visual_dim) + " features, got " +
                           std::to_string(values.size()));
    }
    if (!out.features.emplace(id, std::move(values)).second) {
      throw ParseError(path.string(), line_no, "duplicate image_id '" + id + "'");
    }
  }
  return out;
}

ContextResources Workspace::resources() const {
  ContextResources r;
  r.graph = has_graph ? &graph : nullptr;
  r.captions = has_captions ? &captions : nullptr;
  r.emotions = has_emotions ? &emotions : nullptr;
  r.lexicon = has_lexicon ? &lexicon : nullptr;
  r.predicates = config.predicates;
  r.k = config.k;
  r.place_predicates = config.place_predicates;
  r.place_k = config.place_k;
  return r;
}

Workspace prepare_workspace(const ExperimentConfig& config) {
  config.validate();
  Workspace ws;
  ws.config = config;
  const auto seeds = StageSeeds::from(config.seed);

  auto all = load_records(config.records);
  if (config.eval_records.empty()) {
    if (config.eval_size >= all.size()) {
      throw ValidationError("eval_size " + std::to_string(config.eval_size) +
                            " leaves no training records out of " + std::to_string(all.size()));
    }
    auto [eval, pool] = carve(all, config.eval_size, seeds.eval_split);
    ws.eval_records = std::move(eval);
    ws.train_pool = std::move(pool);
  } else {
    ws.train_pool = std::move(all);
    auto eval = load_records(config.eval_records);
    if (config.eval_size < eval.size()) {
      eval = carve(eval, config.eval_size, seeds.eval_split).first;
    }
    ws.eval_records = std::move(eval);
  }
  if (ws.train_pool.empty()) throw ValidationError("no training records");

  const auto spec = SubsampleSpec::parse(config.subsample, seeds.subsample);
  ws.train_records = subsample(ws.train_pool, spec);

  if (!config.graph.empty()) {
    ws.graph = load_graph(config.graph);
    ws.has_graph = true;
  }
  if (!config.captions.empty()) {
    ws.captions = load_captions(config.captions);
    ws.has_captions = true;
  }
  if (!config.emotions.empty()) {
    ws.emotions = load_emotions(config.emotions);
    ws.has_emotions = true;
  }
  if (!config.lexicon.empty()) {
    ws.lexicon = load_lexicon(config.lexicon);
    ws.has_lexicon = true;
  }
  if (!config.visual.empty()) {
    ws.visual = load_visual(config.visual, config.model.visual_dim);
    ws.has_visual = true;
  }
  return ws;
}

namespace {

std::optional<std::vector<double>> visual_for(const Workspace& ws, const EventRecord& r) {
  if (!ws.has_visual) return std::nullopt;
  auto it = ws.visual.features.find(r.image_id);
  if (it == ws.visual.features.end()) return std::nullopt;
  return it->second;
}

AssemblyOptions assembly_options(const ExperimentConfig& c) {
  return {c.context_position, static_cast<std::size_t>(c.model.max_len)};
}

}  // namespace

TrainingData build_training_data(const Workspace& ws) {
  const auto res = ws.resources();
  const auto& plan = ws.config.plan;
  std::vector<ContextText> contexts;
  std::vector<std::string> corpus;
  contexts.reserve(ws.train_records.size());
  for (const auto& r : ws.train_records) {
    contexts.push_back(build_context_chain(r, plan.train_chain, res));
    corpus.push_back(r.event_text);
    corpus.push_back(r.place_text);
    corpus.push_back(contexts.back().text);
    if (plan.infer_chain != plan.train_chain) {
      corpus.push_back(build_context_chain(r, plan.infer_chain, res).text);
    }
    for (auto rel : kRelations) {
      for (const auto& ref : r.references(rel)) corpus.push_back(ref);
    }
  }
  TrainingData data{Tokenizer::build(corpus, ws.config.min_count), {}};
  const auto opts = assembly_options(ws.config);
  for (std::size_t i = 0; i < ws.train_records.size(); ++i) {
    const auto& r = ws.train_records[i];
    const auto visual = visual_for(ws, r);
    for (auto rel : kRelations) {
      for (const auto& ref : r.references(rel)) {
        auto seq = assemble_training(r, contexts[i], rel, ref, data.tokenizer, opts);
        seq.visual = visual;
        data.sequences.push_back(std::move(seq));
      }
    }
  }
  if (data.sequences.empty()) throw ValidationError("training records carry no inferences");
  return data;
}

PromptSequence generation_prefix(const Workspace& ws, const EventRecord& record, Relation relation,
                                 const Tokenizer& tokenizer) {
  auto seq = assemble_prefix(record, ws.config.plan, relation, ws.resources(), tokenizer,
                             assembly_options(ws.config));
  seq.visual = visual_for(ws, record);
  return seq;
}

Generations generate_all(const Workspace& ws, const Parameters& params, const Tokenizer& tokenizer) {
  const auto decode_seed = StageSeeds::from(ws.config.seed).decode;
  Generations out;
  for (const auto& r : ws.eval_records) {
    for (auto rel : kRelations) {
      if (r.references(rel).empty()) continue;
      DecodeConfig dc = ws.config.decode;
      dc.seed = derive_seed(decode_seed, r.record_id + "/" + std::string(relation_name(rel)));
      const auto prefix = generation_prefix(ws, r, rel, tokenizer);
      out[{r.record_id, rel}] = generate(params, prefix, dc, tokenizer);
    }
  }
  return out;
}

void save_generations(const fs::path& path, const Generations& generations) {
  std::string s = "record_id\trelation\tsample\ttext\n";
  for (const auto& [key, texts] : generations) {
    for (std::size_t i = 0; i < texts.size(); ++i) {
      s += key.first + "\t" + std::string(relation_name(key.second)) + "\t" + std::to_string(i) +
           "\t" + texts[i] + "\n";
    }
  }
  write_text(path, s);
}

Generations load_generations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  Generations out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && text::starts_with(line, "record_id\t")) continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 4) throw ParseError(path.string(), line_no, "expected 4 tab-separated fields");
    const auto rel = parse_relation(f[1]);
    if (!rel) throw ParseError(path.string(), line_no, "unknown relation '" + f[1] + "'");
    auto& texts = out[{f[0], *rel}];
    if (parse_u64("sample", f[2]) != texts.size()) {
      throw ParseError(path.string(), line_no, "sample indices must be consecutive from 0");
    }
    texts.push_back(f[3]);
  }
  return out;
}

std::string format_thousands(std::size_t n) {
  auto digits = std::to_string(n);
  std::string out;
  const std::size_t lead = digits.size() % 3;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i != 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

double ReportRow::data_percent() const {
  return pool_size == 0 ? 0.0 : 100.0 * static_cast<double>(data_count) / static_cast<double>(pool_size);
}

std::string ReportRow::data_size_label() const {
  const double pct = data_percent();
  const auto rounded = static_cast<long long>(std::floor(pct + 0.5));
  const bool exact = data_count * 100 == static_cast<std::size_t>(rounded) * pool_size;
  return format_thousands(data_count) + " (" + (exact ? "" : "~") + std::to_string(rounded) + "%)";
}

std::string ReportRow::label() const {
  return train_label + " / " + infer_label + " / " + data_size_label();
}

StageError::StageError(std::string stage, std::vector<fs::path> artifacts, const std::string& what)
    : Error("stage '" + stage + "' failed: " + what),
      stage_(std::move(stage)),
      artifacts_(std::move(artifacts)) {}

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  const auto started = std::chrono::steady_clock::now();
  std::vector<fs::path> artifacts;
  std::string stage;
  auto note = [&](const std::string& msg) {
    if (log) *log << "[" << (config.name.empty() ? "experiment" : config.name) << "] " << msg << std::endl;
  };
  auto emit = [&](const std::string& file, const std::string& content) {
    const auto path = config.out / file;
    write_text(path, content);
    artifacts.push_back(path);
  };
  auto run = [&](const std::string& name, const auto& body) {
    stage = name;
    try {
      return body();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, artifacts, e.what());
    }
  };

  ExperimentResult result;
  auto& row = result.row;
  row.name = config.name;
  row.train_label = chain_label(config.plan.train_chain);
  row.infer_label = chain_label(config.plan.infer_chain);
  row.config_hash = hex64(config.hash());

  const Workspace ws = run("load", [&] {
    auto w = prepare_workspace(config);
    fs::create_directories(config.out);
    emit("config.kv", config.dump());
    emit("eval_ids.txt", ids_text(w.eval_records));
    emit("train_ids.txt", ids_text(w.train_records));
    return w;
  });
  row.data_count = ws.train_records.size();
  row.pool_size = ws.train_pool.size();
  note("train " + std::to_string(row.data_count) + "/" + std::to_string(row.pool_size) +
       " records, eval " + std::to_string(ws.eval_records.size()));

  const TrainingData data = run("augment", [&] {
    auto d = build_training_data(ws);
    d.tokenizer.save(config.out / "vocab.tsv");
    artifacts.push_back(config.out / "vocab.tsv");
    return d;
  });
  row.vocab_hash = hex64(data.tokenizer.hash());
  note(std::to_string(data.sequences.size()) + " sequences, vocabulary " +
       std::to_string(data.tokenizer.size()));

  const Parameters params = run("train", [&] {
    ModelConfig mc = config.model;
    mc.vocab_size = static_cast<int>(data.tokenizer.size());
    mc.seed = StageSeeds::from(config.seed).init;
    auto tr = train(mc, data.sequences, config.epochs, config.optimizer,
                    StageSeeds::from(config.seed).shuffle, [&](const EpochStats& s) {
                      note("epoch " + std::to_string(s.epoch) + " inference nll/token " +
                           format_double(s.per_token.inference_nll));
                    });
    result.history = tr.history;
    emit("train_log.csv", format_training_log(tr.history));
    const auto ckpt = config.out / "checkpoint.bin";
    save_checkpoint(ckpt, tr.params, data.tokenizer.hash());
    artifacts.push_back(ckpt);
    row.checkpoint_hash = hex64(file_hash(ckpt));
    return std::move(tr.params);
  });

  const Generations gens = run("generate", [&] {
    auto g = generate_all(ws, params, data.tokenizer);
    save_generations(config.out / "generations.tsv", g);
    artifacts.push_back(config.out / "generations.tsv");
    return g;
  });

  result.report = run("score", [&] {
    EvaluateOptions eo;
    eo.aggregate = config.aggregate;
    eo.bleu.smoothing_epsilon = config.bleu_smoothing;
    if (ws.has_lexicon) eo.meteor.synonyms = &ws.lexicon.entries;
    auto rep = evaluate(ws.eval_records, gens, eo);
    json j;
    j["bleu2"] = rep.bleu2;
    j["meteor"] = rep.meteor;
    j["cider"] = rep.cider;
    j["pairs"] = rep.pairs;
    j["groups"] = rep.groups;
    j["skipped_groups"] = rep.skipped_groups;
    j["warnings"] = rep.warnings;
    json per = json::object();
    for (const auto& [id, rels] : rep.per_record) {
      json r = json::object();
      for (const auto& [rel, s] : rels) {
        r[std::string(relation_name(rel))] = {
            {"bleu2", s.bleu2}, {"meteor", s.meteor}, {"cider", s.cider}, {"pairs", s.pairs}};
      }
      per[id] = r;
    }
    j["per_record"] = per;
    emit("scores.json", j.dump(2) + "\n");
    return rep;
  });
  row.bleu2 = result.report.bleu2;
  row.meteor = result.report.meteor;
  row.cider = result.report.cider;
  row.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  run("report", [&] {
    json j = {{"name", row.name},
              {"train_prompt", row.train_label},
              {"infer_prompt", row.infer_label},
              {"data_count", row.data_count},
              {"pool_size", row.pool_size},
              {"data_size", row.data_size_label()},
              {"bleu2", row.bleu2},
              {"meteor", row.meteor},
              {"cider", row.cider},
              {"wall_seconds", row.wall_seconds},
              {"config_hash", row.config_hash},
              {"vocab_hash", row.vocab_hash},
              {"checkpoint_hash", row.checkpoint_hash}};
    emit("row.json", j.dump(2) + "\n");
    return 0;
  });
  note("BLEU-2 " + format_double(row.bleu2) + " METEOR " + format_double(row.meteor) + " CIDEr " +
       format_double(row.cider));
  return result;
}

std::vector<ExperimentConfig> load_grid(const fs::path& path) {
  const auto doc = load_kv(path);
  std::vector<ExperimentConfig> out;
  try {
    if (doc.sections.empty()) {
      out.push_back(ExperimentConfig::from_kv(doc.base));
      out.back().resolve_paths(path.parent_path());
      return out;
    }
    for (const auto& section : doc.sections) {
      ExperimentConfig c;
      c.apply(doc.base);
      c.name = section.name;
      c.apply(section);
      c.resolve_paths(path.parent_path());
      out.push_back(std::move(c));
    }
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return out;
}

std::vector<ReportRow> run_grid(const std::vector<ExperimentConfig>& configs, const fs::path& output,
                                std::ostream* log) {
  if (configs.empty()) throw ConfigError("grid has no rows");
  fs::create_directories(output / "rows");
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    ExperimentConfig c = configs[i];
    if (c.name.empty()) c.name = "row" + std::to_string(i + 1);
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%02zu-", i + 1);
    c.out = output / "rows" / (prefix + slug(c.name));
    try {
      rows.push_back(run_experiment(c, log).row);
    } catch (const std::exception& e) {
      ReportRow r;
      r.name = c.name;
      r.train_label = chain_label(c.plan.train_chain);
      r.infer_label = chain_label(c.plan.infer_chain);
      r.config_hash = hex64(c.hash());
      r.ok = false;
      r.failure = e.what();
      if (log) *log << "[" << c.name << "] FAILED: " << e.what() << std::endl;
      rows.push_back(std::move(r));
    }
  }
  write_text(output / "report.csv", format_report_table(rows));
  write_text(output / "report_full.csv", format_report_full(rows));
  std::string timings = "name,wall_seconds\n";
  for (const auto& r : rows) timings += csv_field(r.name) + "," + format_double(r.wall_seconds) + "\n";
  write_text(output / "timings.csv", timings);
  for (const auto* metric : {"bleu2", "meteor", "cider"}) {
    write_text(output / ("plot_" + std::string(metric) + ".csv"), format_plot_series(rows, metric));
  }
  return rows;
}

std::string format_report_table(const std::vector<ReportRow>& rows) {
  std::string s = "Method,Inference Data,Data Size,BLEU-2,METEOR,CIDEr\n";
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    s += csv_field(r.train_label) + "," + csv_field(r.infer_label) + ",";
    if (r.ok) {
      s += csv_field(r.data_size_label()) + "," + pct(r.bleu2) + "," + pct(r.meteor) + "," +
           pct(r.cider) + "\n";
    } else {
      s += "NA,NA,NA,NA\n";
    }
  }
  return s;
}

std::string format_report_full(const std::vector<ReportRow>& rows) {
  std::string s =
      "name,train_prompt,infer_prompt,data_count,pool_size,data_percent,bleu2,meteor,cider,status,"
      "failure,config_hash,vocab_hash,checkpoint_hash\n";
  for (const auto& r : rows) {
    s += csv_field(r.name) + "," + csv_field(r.train_label) + "," + csv_field(r.infer_label) + ",";
    if (r.ok) {
      s += std::to_string(r.data_count) + "," + std::to_string(r.pool_size) + "," +
           format_double(r.data_percent()) + "," + format_double(r.bleu2) + "," +
           format_double(r.meteor) + "," + format_double(r.cider) + ",ok,,";
    } else {
      s += "NA,NA,NA,NA,NA,NA,failed," + csv_field(r.failure) + ",";
    }
    s += r.config_hash + "," + r.vocab_hash + "," + r.checkpoint_hash + "\n";
  }
  return s;
}

std::string format_plot_series(const std::vector<ReportRow>& rows, const std::string& metric) {
  std::function<double(const ReportRow&)> get;
  if (metric == "bleu2") get = [](const ReportRow& r) { return r.bleu2; };
  else if (metric == "meteor") get = [](const ReportRow& r) { return r.meteor; };
  else if (metric == "cider") get = [](const ReportRow& r) { return r.cider; };
  else throw ConfigError("unknown metric '" + metric + "'");

  std::vector<std::string> plans;
  std::map<std::string, std::vector<const ReportRow*>> series;
  for (const auto& r : rows) {
    if (!r.ok) continue;
    const auto plan = r.train_label + " / " + r.infer_label;
    if (!series.contains(plan)) plans.push_back(plan);
    series[plan].push_back(&r);
  }
  std::string s = "plan,count,percent,value\n";
  for (const auto& plan : plans) {
    auto pts = series[plan];
    std::stable_sort(pts.begin(), pts.end(),
                     [](const ReportRow* a, const ReportRow* b) { return a->data_count < b->data_count; });
    for (const auto* r : pts) {
      s += csv_field(plan) + "," + std::to_string(r->data_count) + "," +
           format_double(r->data_percent()) + "," + format_double(get(*r)) + "\n";
    }
  }
  return s;
}

}  // namespace ctxprompt
