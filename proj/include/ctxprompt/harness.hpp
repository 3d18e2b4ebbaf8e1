#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxprompt/assembler.hpp"
#include "ctxprompt/context.hpp"
#include "ctxprompt/dataset.hpp"
#include "ctxprompt/error.hpp"
#include "ctxprompt/kv_config.hpp"
#include "ctxprompt/knowledge.hpp"
#include "ctxprompt/metrics.hpp"
#include "ctxprompt/model.hpp"
#include "ctxprompt/sampling.hpp"
#include "ctxprompt/trainer.hpp"

namespace ctxprompt {

struct ExperimentConfig {
  std::string name;

  std::filesystem::path records;
  std::filesystem::path eval_records;  // empty: carve eval_size records out of `records`
  std::size_t eval_size = 100;
  std::filesystem::path graph;
  std::filesystem::path captions;
  std::filesystem::path emotions;
  std::filesystem::path lexicon;
  std::filesystem::path visual;  // optional "image_id<TAB>v1 v2 ..." sidecar

  PromptPlan plan;
  std::vector<Predicate> predicates = {Predicate(Predicate::Kind::HasProperty),
                                       Predicate(Predicate::Kind::PartOf)};
  std::size_t k = 5;
  std::optional<std::vector<Predicate>> place_predicates;
  std::optional<std::size_t> place_k;
  ContextPosition context_position = ContextPosition::AfterPlace;

  std::string subsample = "fraction:1";
  std::size_t min_count = 1;

  ModelConfig model;  // vocab_size and seed are filled in by the pipeline
  OptimizerConfig optimizer;
  int epochs = 5;
  DecodeConfig decode;

  Aggregate aggregate = Aggregate::Mean;
  double bleu_smoothing = 0.0;

  std::filesystem::path out = "out";
  std::uint64_t seed = 1;

  // Applies one key; throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void apply(const KvSection& section);
  // Canonical "key = value" dump, one line per key in a fixed order.
  std::string dump() const;
  // Hash of dump() without the output directory.
  std::uint64_t hash() const;
  // Checks chains, paths and numeric ranges.
  void validate() const;

  // Makes relative input paths relative to base (the config file's directory).
  void resolve_paths(const std::filesystem::path& base);

  static ExperimentConfig from_kv(const KvSection& section);
  static ExperimentConfig load(const std::filesystem::path& path);
};

// Every recognised configuration key with a one-line description.
const std::vector<std::pair<std::string, std::string>>& config_keys();

// Stage seeds derived from the global seed by label.
struct StageSeeds {
  std::uint64_t eval_split;
  std::uint64_t subsample;
  std::uint64_t init;
  std::uint64_t shuffle;
  std::uint64_t decode;
  static StageSeeds from(std::uint64_t global);
};

struct VisualSidecar {
  std::map<std::string, std::vector<double>> features;
};
VisualSidecar load_visual(const std::filesystem::path& path, int visual_dim);

// Loaded inputs for one experiment.
struct Workspace {
  ExperimentConfig config;
  std::vector<EventRecord> train_pool;
  std::vector<EventRecord> eval_records;
  std::vector<EventRecord> train_records;  // subsampled
  KnowledgeGraph graph;
  CaptionSidecar captions;
  FESidecar emotions;
  SynonymLexicon lexicon;
  VisualSidecar visual;
  bool has_graph = false, has_captions = false, has_emotions = false, has_lexicon = false,
       has_visual = false;

  ContextResources resources() const;
};

Workspace prepare_workspace(const ExperimentConfig& config);

struct TrainingData {
  Tokenizer tokenizer;
  std::vector<PromptSequence> sequences;
};

// Builds training contexts, vocabulary and sequences (one per record,
// relation and reference).
TrainingData build_training_data(const Workspace& ws);

// Generation prefix for a record with the inference chain and visual features.
PromptSequence generation_prefix(const Workspace& ws, const EventRecord& record, Relation relation,
                                 const Tokenizer& tokenizer);

// num_samples generations for every (eval record, relation) with references.
Generations generate_all(const Workspace& ws, const Parameters& params, const Tokenizer& tokenizer);

void save_generations(const std::filesystem::path& path, const Generations& generations);
Generations load_generations(const std::filesystem::path& path);

struct ReportRow {
  std::string name;
  std::string train_label;
  std::string infer_label;
  std::size_t data_count = 0;
  std::size_t pool_size = 0;
  double bleu2 = 0.0;
  double meteor = 0.0;
  double cider = 0.0;
  double wall_seconds = 0.0;
  std::string config_hash;
  std::string vocab_hash;
  std::string checkpoint_hash;
  bool ok = true;
  std::string failure;

  double data_percent() const;
  // "45,000 (~40%)" or "1,900 (100%)"
  std::string data_size_label() const;
  // "CW + C + FE / C + CW + FE / 45,000 (~40%)"
  std::string label() const;
};

// Raised when a pipeline stage fails; names the stage and lists artifacts the
// completed stages left behind.
class StageError : public Error {
 public:
  StageError(std::string stage, std::vector<std::filesystem::path> artifacts, const std::string& what);
  const std::string& stage() const { return stage_; }
  const std::vector<std::filesystem::path>& artifacts() const { return artifacts_; }

 private:
  std::string stage_;
  std::vector<std::filesystem::path> artifacts_;
};

struct ExperimentResult {
  ReportRow row;
  MetricReport report;
  std::vector<EpochStats> history;
};

// augment -> subsample -> train -> generate -> score, writing every artifact
// into config.out.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

// Grid file: base keys followed by one [section] per row of overrides.
std::vector<ExperimentConfig> load_grid(const std::filesystem::path& path);

// Runs every config in order (each in <output>/rows/NN-name) and writes
// report.csv, report_full.csv, timings.csv and plot_{bleu2,meteor,cider}.csv.
std::vector<ReportRow> run_grid(const std::vector<ExperimentConfig>& configs,
                                const std::filesystem::path& output, std::ostream* log = nullptr);

// Table columns Method, Inference Data, Data Size, BLEU-2, METEOR, CIDEr with
// scores multiplied by 100.
std::string format_report_table(const std::vector<ReportRow>& rows);
std::string format_report_full(const std::vector<ReportRow>& rows);
std::string format_plot_series(const std::vector<ReportRow>& rows, const std::string& metric);

std::string format_thousands(std::size_t n);

}  // namespace ctxprompt
