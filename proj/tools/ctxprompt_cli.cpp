#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctxprompt/checkpoint.hpp"
#include "ctxprompt/fixtures.hpp"
#include "ctxprompt/harness.hpp"
#include "ctxprompt/rng.hpp"
#include "ctxprompt/text.hpp"

namespace fs = std::filesystem;
using namespace ctxprompt;

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> overrides;
};

void add_config_flags(CLI::App* cmd, Globals& g) {
  for (const auto& [key, help] : config_keys()) {
    if (key == "out" || key == "seed") continue;
    auto dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    const auto names = dashed == key ? "--" + key : "--" + key + ",--" + dashed;
    cmd->add_option_function<std::string>(
        names, [&g, k = key](const std::string& v) { g.overrides[k] = v; }, help);
  }
}

void apply_overrides(ExperimentConfig& c, const Globals& g) {
  for (const auto& [k, v] : g.overrides) c.set(k, v);
  if (!g.out.empty()) c.out = g.out;
  if (g.seed) c.seed = *g.seed;
}

ExperimentConfig experiment_config(const Globals& g) {
  ExperimentConfig c;
  if (!g.config.empty()) c = ExperimentConfig::load(g.config);
  apply_overrides(c, g);
  return c;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void print_scores(const MetricReport& rep) {
  std::cout << "BLEU-2 " << rep.bleu2 << "\nMETEOR " << rep.meteor << "\nCIDEr " << rep.cider
            << "\npairs " << rep.pairs << " groups " << rep.groups << " skipped " << rep.skipped_groups
            << "\n";
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_validate(const std::string& path, const std::string& canonical_out) {
  const auto content = slurp(path);
  std::istringstream in(content);
  std::string line, canonical;
  std::size_t line_no = 0, records = 0, rewritten = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto rec = parse_record(line, path, line_no);
    validate_record(rec);
    if (!ids.insert(rec.record_id).second) {
      throw ParseError(path, line_no, "duplicate record_id '" + rec.record_id + "'");
    }
    const auto formatted = format_record(rec);
    if (parse_record(formatted, path, line_no) != rec) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": record does not round-trip");
    }
    if (formatted != line) ++rewritten;
    canonical += formatted + "\n";
    ++records;
  }
  std::cout << records << " records valid; " << rewritten << " lines differ from canonical form\n";
  if (!canonical_out.empty()) write_file(canonical_out, canonical);
  return 0;
}

int cmd_validate_sidecars(const Globals& g) {
  auto c = experiment_config(g);
  const auto ws = prepare_workspace(c);
  std::size_t captions_missing = 0, fe_missing = 0;
  for (const auto* set : {&ws.train_pool, &ws.eval_records}) {
    for (const auto& r : *set) {
      if (ws.has_captions && !ws.captions.captions.contains(r.image_id)) ++captions_missing;
      if (ws.has_emotions) {
        for (const auto& p : persons_in_text(r.event_text)) {
          if (!ws.emotions.labels.contains({r.image_id, p.id})) ++fe_missing;
        }
      }
    }
  }
  std::cout << "graph triples " << ws.graph.size() << "\ncaptions " << ws.captions.captions.size()
            << " (records without caption: " << captions_missing << ")\nemotion labels "
            << ws.emotions.labels.size() << " (mentioned persons without label: " << fe_missing
            << ")\nlexicon entries " << ws.lexicon.entries.size() << "\n";
  return 0;
}

int cmd_augment(const Globals& g) {
  auto c = experiment_config(g);
  const auto ws = prepare_workspace(c);
  const auto res = ws.resources();
  std::string s = "record_id\tsplit\tchain\tcontext\n";
  const auto train_label = chain_label(c.plan.train_chain);
  const auto infer_label = chain_label(c.plan.infer_chain);
  for (const auto& r : ws.train_records) {
    s += r.record_id + "\ttrain\t" + train_label + "\t" +
         build_context_chain(r, c.plan.train_chain, res).text + "\n";
  }
  for (const auto& r : ws.eval_records) {
    s += r.record_id + "\teval\t" + infer_label + "\t" +
         build_context_chain(r, c.plan.infer_chain, res).text + "\n";
  }
  const auto path = c.out / "contexts.tsv";
  write_file(path, s);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_subsample(const Globals& g, const std::string& records, const std::string& spec_text) {
  if (g.out.empty()) throw ConfigError("--out is required");
  const auto seed = derive_seed(g.seed.value_or(1), "subsample");
  const auto all = load_records(records);
  const auto picked = subsample(all, SubsampleSpec::parse(spec_text, seed));
  save_records(g.out, picked);
  std::cout << picked.size() << " of " << all.size() << " records -> " << g.out << "\n";
  return 0;
}

int cmd_train(const Globals& g) {
  auto c = experiment_config(g);
  const auto ws = prepare_workspace(c);
  const auto data = build_training_data(ws);
  fs::create_directories(c.out);
  data.tokenizer.save(c.out / "vocab.tsv");
  ModelConfig mc = c.model;
  mc.vocab_size = static_cast<int>(data.tokenizer.size());
  const auto seeds = StageSeeds::from(c.seed);
  mc.seed = seeds.init;
  std::cout << data.sequences.size() << " sequences, " << mc.parameter_count() << " parameters\n";
  auto tr = train(mc, data.sequences, c.epochs, c.optimizer, seeds.shuffle, [](const EpochStats& s) {
    std::cout << "epoch " << s.epoch << " total/token " << s.per_token.total << " inference/token "
              << s.per_token.inference_nll << std::endl;
  });
  write_file(c.out / "train_log.csv", format_training_log(tr.history));
  save_checkpoint(c.out / "checkpoint.bin", tr.params, data.tokenizer.hash());
  std::cout << "wrote " << (c.out / "checkpoint.bin").string() << "\n";
  return 0;
}

int cmd_generate(const Globals& g, std::string checkpoint, std::string vocab) {
  auto c = experiment_config(g);
  if (checkpoint.empty()) checkpoint = (c.out / "checkpoint.bin").string();
  if (vocab.empty()) vocab = (c.out / "vocab.tsv").string();
  const auto ws = prepare_workspace(c);
  const auto tok = Tokenizer::load(vocab);
  const auto ckpt = load_checkpoint(checkpoint);
  if (ckpt.vocab_hash != tok.hash()) throw ValidationError("checkpoint was trained with a different vocabulary");
  const auto gens = generate_all(ws, ckpt.params, tok);
  fs::create_directories(c.out);
  save_generations(c.out / "generations.tsv", gens);
  std::cout << "wrote " << (c.out / "generations.tsv").string() << "\n";
  return 0;
}

int cmd_score(const Globals& g, const std::string& records, const std::string& generations,
              const std::string& aggregate) {
  const auto recs = load_records(records);
  const auto gens = load_generations(generations);
  EvaluateOptions eo;
  if (aggregate == "max") eo.aggregate = Aggregate::Max;
  else if (aggregate != "mean") throw ConfigError("aggregate must be mean or max");
  const auto rep = evaluate(recs, gens, eo);
  print_scores(rep);
  if (!g.out.empty()) {
    nlohmann::json j = {{"bleu2", rep.bleu2},   {"meteor", rep.meteor}, {"cider", rep.cider},
                        {"pairs", rep.pairs},   {"groups", rep.groups}, {"skipped_groups", rep.skipped_groups},
                        {"warnings", rep.warnings}};
    write_file(g.out, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_experiment(const Globals& g) {
  auto c = experiment_config(g);
  const auto result = run_experiment(c, &std::cerr);
  std::cout << result.row.label() << "\n";
  print_scores(result.report);
  return 0;
}

int cmd_grid(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required");
  auto configs = load_grid(g.config);
  for (auto& c : configs) apply_overrides(c, g);
  const fs::path out = g.out.empty() ? fs::path("grid-out") : fs::path(g.out);
  const auto rows = run_grid(configs, out, &std::cerr);
  std::cout << format_report_table(rows);
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.ok ? 0 : 1;
  return failed == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-prompt augmentation, training and evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "experiment or grid config file");
  app.add_option("--out", g.out, "output directory or file");
  app.add_option_function<std::uint64_t>("--seed", [&g](std::uint64_t s) { g.seed = s; }, "global seed");

  std::function<int()> action;

  auto* validate = app.add_subcommand("validate", "check a record file and its canonical round trip");
  std::string validate_path, canonical_out;
  validate->add_option("records", validate_path)->required();
  validate->add_option("--canonical", canonical_out, "write the canonical form here");
  validate->callback([&] { action = [&] { return cmd_validate(validate_path, canonical_out); }; });

  auto* sidecars = app.add_subcommand("validate-sidecars", "load every input named by a config");
  add_config_flags(sidecars, g);
  sidecars->callback([&] { action = [&] { return cmd_validate_sidecars(g); }; });

  auto* augment = app.add_subcommand("augment", "write the context text for every record");
  add_config_flags(augment, g);
  augment->callback([&] { action = [&] { return cmd_augment(g); }; });

  auto* sub = app.add_subcommand("subsample", "draw a seeded subset of a record file");
  std::string sub_records, sub_spec;
  sub->add_option("records", sub_records)->required();
  sub->add_option("--spec", sub_spec, "count:N or fraction:F")->required();
  sub->callback([&] { action = [&] { return cmd_subsample(g, sub_records, sub_spec); }; });

  auto* trn = app.add_subcommand("train", "build sequences and train the model");
  add_config_flags(trn, g);
  trn->callback([&] { action = [&] { return cmd_train(g); }; });

  auto* gen = app.add_subcommand("generate", "sample inferences for the evaluation records");
  std::string gen_ckpt, gen_vocab;
  add_config_flags(gen, g);
  gen->add_option("--checkpoint", gen_ckpt, "default: <out>/checkpoint.bin");
  gen->add_option("--vocab", gen_vocab, "default: <out>/vocab.tsv");
  gen->callback([&] { action = [&] { return cmd_generate(g, gen_ckpt, gen_vocab); }; });

  auto* score = app.add_subcommand("score", "score a generations file against records");
  std::string score_records, score_gens, score_agg = "mean";
  score->add_option("records", score_records)->required();
  score->add_option("generations", score_gens)->required();
  score->add_option("--aggregate", score_agg, "mean or max");
  score->callback([&] { action = [&] { return cmd_score(g, score_records, score_gens, score_agg); }; });

  auto* exp = app.add_subcommand("experiment", "run the full pipeline for one config");
  add_config_flags(exp, g);
  exp->callback([&] { action = [&] { return cmd_experiment(g); }; });

  auto* grid = app.add_subcommand("grid", "run every row of a grid config and write reports");
  add_config_flags(grid, g);
  grid->callback([&] { action = [&] { return cmd_grid(g); }; });

  auto* fix = app.add_subcommand("fixtures", "write the synthetic corpus, sidecars and configs");
  FixtureOptions fo;
  fix->add_option("--records", fo.records, "number of records");
  fix->callback([&] {
    action = [&] {
      if (g.out.empty()) throw ConfigError("--out is required");
      if (g.seed) fo.seed = *g.seed;
      const auto paths = write_fixtures(g.out, fo);
      std::cout << "wrote " << fo.records << " records and configs to " << g.out << "\n";
      (void)paths;
      return 0;
    };
  });

  CLI11_PARSE(app, argc, argv);
  try {
    return action();
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& a : e.artifacts()) std::cerr << "  kept " << a.string() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
