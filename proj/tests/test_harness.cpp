#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctxprompt/error.hpp"
#include "ctxprompt/fixtures.hpp"
#include "ctxprompt/harness.hpp"
#include "ctxprompt/kv_config.hpp"

using namespace ctxprompt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ctxprompt-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small and fast: 300 records, 1 epoch, tiny model.
FixturePaths small_fixtures(const fs::path& dir) {
  FixtureOptions o;
  o.records = 300;
  return write_fixtures(dir, o);
}

ExperimentConfig fast(ExperimentConfig c, const fs::path& out) {
  c.set("epochs", "1");
  c.set("eval_size", "20");
  c.set("embed_dim", "16");
  c.set("num_samples", "2");
  c.out = out;
  return c;
}

}  // namespace

TEST(Config, ParsesKeysAndRejectsUnknown) {
  ExperimentConfig c;
  c.set("train_chain", "CW + C + FE");
  c.set("infer_chain", "None");
  c.set("subsample", "count:50");
  c.set("learning_rate", "0.01");
  c.set("aggregate", "max");
  EXPECT_EQ(c.subsample, "count:50");
  EXPECT_EQ(c.aggregate, Aggregate::Max);
  EXPECT_THROW(c.set("no_such_key", "1"), ConfigError);
  EXPECT_THROW(c.set("epochs", "many"), ConfigError);
  EXPECT_THROW(c.set("train_chain", "C + Bogus"), Error);
}

TEST(Config, DumpRoundTripsAndHashIgnoresOutput) {
  ExperimentConfig c;
  c.set("train_chain", "C + FE");
  c.set("k", "3");
  c.set("seed", "42");
  const auto kv = parse_kv(c.dump());
  const auto back = ExperimentConfig::from_kv(kv.base);
  EXPECT_EQ(back.dump(), c.dump());
  EXPECT_EQ(back.hash(), c.hash());
  auto moved = c;
  moved.out = "elsewhere";
  EXPECT_EQ(moved.hash(), c.hash());
  moved.set("k", "4");
  EXPECT_NE(moved.hash(), c.hash());
  for (const auto& [key, help] : config_keys()) EXPECT_FALSE(help.empty()) << key;
}

TEST(Config, ValidateReportsMissingInputs) {
  ExperimentConfig c;
  c.records = "/nonexistent/records.jsonl";
  EXPECT_THROW(c.validate(), Error);
}

TEST(Config, ChainNeedingCaptionsRequiresSidecar) {
  const auto dir = scratch("validate");
  const auto paths = small_fixtures(dir);
  auto c = ExperimentConfig::load(paths.experiment_context);
  EXPECT_NO_THROW(c.validate());
  c.captions.clear();
  EXPECT_THROW(c.validate(), Error);
}

TEST(StageSeedsTest, DistinctAndDeterministic) {
  const auto a = StageSeeds::from(1), b = StageSeeds::from(1), c = StageSeeds::from(2);
  EXPECT_EQ(a.init, b.init);
  EXPECT_NE(a.init, c.init);
  EXPECT_NE(a.init, a.shuffle);
  EXPECT_NE(a.subsample, a.eval_split);
}

TEST(Report, RowLabels) {
  ReportRow r;
  r.train_label = "None";
  r.infer_label = "None";
  r.data_count = 1900;
  r.pool_size = 1900;
  EXPECT_EQ(r.label(), "None / None / 1,900 (100%)");
  r.train_label = "CW + C + FE";
  r.infer_label = "C + CW + FE";
  r.data_count = 45000;
  r.pool_size = 112500;
  EXPECT_EQ(r.data_size_label(), "45,000 (40%)");
  r.pool_size = 112000;
  EXPECT_EQ(r.data_size_label(), "45,000 (~40%)");
  EXPECT_EQ(format_thousands(0), "0");
  EXPECT_EQ(format_thousands(999), "999");
  EXPECT_EQ(format_thousands(1234567), "1,234,567");
}

TEST(Report, TableScalesScoresAndMarksFailures) {
  ReportRow ok;
  ok.train_label = "C + FE";
  ok.infer_label = "C + FE";
  ok.data_count = 10;
  ok.pool_size = 10;
  ok.bleu2 = 0.5;
  ok.meteor = 0.25;
  ok.cider = 1.5;
  ReportRow bad = ok;
  bad.ok = false;
  bad.failure = "boom";
  EXPECT_EQ(format_report_table({ok, bad}),
            "Method,Inference Data,Data Size,BLEU-2,METEOR,CIDEr\n"
            "C + FE,C + FE,10 (100%),50.00,25.00,150.00\n"
            "C + FE,C + FE,NA,NA,NA,NA\n");
  EXPECT_NE(format_report_full({bad}).find("failed"), std::string::npos);
}

TEST(Report, PlotSeriesSortedByCount) {
  ReportRow a, b;
  a.train_label = b.train_label = "None";
  a.infer_label = b.infer_label = "None";
  a.pool_size = b.pool_size = 100;
  a.data_count = 100;
  b.data_count = 40;
  a.bleu2 = 0.3;
  b.bleu2 = 0.2;
  const auto s = format_plot_series({a, b}, "bleu2");
  EXPECT_LT(s.find(",40,"), s.find(",100,"));
}

TEST(Generations, SaveLoadRoundTrip) {
  const auto dir = scratch("gens");
  Generations g;
  g[{"r1", Relation::Intent}] = {"to go home", "to eat"};
  g[{"r2", Relation::After}] = {"sleep"};
  save_generations(dir / "g.tsv", g);
  EXPECT_EQ(load_generations(dir / "g.tsv"), g);
}

TEST(Grid, LoadsSectionsAsRows) {
  const auto dir = scratch("grid-load");
  const auto paths = small_fixtures(dir);
  const auto rows = load_grid(paths.grid);
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows[0].name, "context-22");
  EXPECT_EQ(rows[0].subsample, "fraction:0.22");
  EXPECT_EQ(rows[7].name, "none-100");
  EXPECT_TRUE(rows[0].records.is_absolute());
}

TEST(Experiment, SmallRunWritesArtifacts) {
  const auto dir = scratch("experiment");
  const auto paths = small_fixtures(dir);
  const auto c = fast(ExperimentConfig::load(paths.experiment_context), dir / "out");
  const auto res = run_experiment(c);
  EXPECT_TRUE(res.row.ok);
  EXPECT_EQ(res.row.data_count, 280u);
  EXPECT_EQ(res.row.pool_size, 280u);
  EXPECT_EQ(res.history.size(), 1u);
  for (const char* f : {"config.kv", "eval_ids.txt", "train_ids.txt", "vocab.tsv", "train_log.csv",
                        "checkpoint.bin", "generations.tsv", "scores.json", "row.json"}) {
    EXPECT_TRUE(fs::exists(c.out / f)) << f;
  }
  const auto gens = load_generations(c.out / "generations.tsv");
  EXPECT_FALSE(gens.empty());
  for (const auto& [key, texts] : gens) EXPECT_EQ(texts.size(), 2u);
}

TEST(Grid, FailedRowIsIsolatedAndReportsNA) {
  const auto dir = scratch("grid-fail");
  const auto paths = small_fixtures(dir);
  auto good = fast(ExperimentConfig::load(paths.experiment_baseline), "");
  good.name = "good";
  auto broken = fast(ExperimentConfig::load(paths.experiment_context), "");
  broken.name = "broken";
  broken.captions = dir / "missing.tsv";
  const auto rows = run_grid({broken, good}, dir / "grid");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].ok);
  EXPECT_TRUE(rows[1].ok);
  const auto table = slurp(dir / "grid" / "report.csv");
  EXPECT_NE(table.find("NA,NA,NA,NA"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "grid" / "plot_cider.csv"));
}

TEST(Grid, RerunIsByteIdentical) {
  const auto dir = scratch("grid-det");
  const auto paths = small_fixtures(dir);
  auto a = fast(ExperimentConfig::load(paths.experiment_context), "");
  a.name = "ctx";
  a.set("subsample", "fraction:0.5");
  run_grid({a}, dir / "one");
  run_grid({a}, dir / "two");
  for (const char* f : {"report.csv", "report_full.csv", "plot_bleu2.csv", "plot_meteor.csv", "plot_cider.csv"}) {
    EXPECT_EQ(slurp(dir / "one" / f), slurp(dir / "two" / f)) << f;
  }
  EXPECT_EQ(slurp(dir / "one" / "rows" / "01-ctx" / "checkpoint.bin"),
            slurp(dir / "two" / "rows" / "01-ctx" / "checkpoint.bin"));
}
