#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "ctxprompt/dataset.hpp"
#include "ctxprompt/error.hpp"
#include "ctxprompt/fixtures.hpp"

using namespace ctxprompt;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
  const auto dir = fs::temp_directory_path() / "ctxprompt-dataset-test";
  fs::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

const char* kLine =
    R"({"record_id":"r1","image_id":"img1","event":"Person-4 is sitting on the couch","place":"in a living room","persons":[4],"intent":["be comfortable"],"before":[],"after":["fall asleep","watch tv"]})";

}  // namespace

TEST(Records, ParseReadsEveryField) {
  const auto r = parse_record(kLine);
  EXPECT_EQ(r.record_id, "r1");
  EXPECT_EQ(r.image_id, "img1");
  EXPECT_EQ(r.place_text, "in a living room");
  ASSERT_EQ(r.persons.size(), 1u);
  EXPECT_EQ(r.persons[0].id, 4);
  EXPECT_EQ(r.persons[0].surface(), "Person-4");
  EXPECT_TRUE(r.references(Relation::Before).empty());
  EXPECT_EQ(r.references(Relation::After).size(), 2u);
}

TEST(Records, CanonicalFormatRoundTripsBitExact) {
  EXPECT_EQ(format_record(parse_record(kLine)), kLine);
}

TEST(Records, AcceptsPersonsAsStringAndIgnoresUnknownKeys) {
  const auto r = parse_record(
      R"({"extra":1,"record_id":"x","image_id":"i","event":"Person-2 waves at Person-1","place":"","persons":"1 2","intent":[],"before":[],"after":[]})");
  ASSERT_EQ(r.persons.size(), 2u);
  EXPECT_EQ(r.persons[1].id, 2);
}

TEST(Records, MentionedPersonMustBeListed) {
  try {
    parse_record(
        R"({"record_id":"bad7","image_id":"i","event":"Person-4 sits","place":"","persons":[2],"intent":[],"before":[],"after":[]})");
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("bad7"), std::string::npos);
  }
}

TEST(Records, RejectsEmptyEventAndEmptyReference) {
  EventRecord r = parse_record(kLine);
  r.event_text.clear();
  EXPECT_THROW(validate_record(r), ValidationError);
  r = parse_record(kLine);
  r.references(Relation::Intent).push_back("");
  EXPECT_THROW(validate_record(r), ValidationError);
}

TEST(Records, LoadKeepsFileOrderAndReportsLineNumbers) {
  const auto good = temp_file("good.jsonl", std::string(kLine) + "\n" +
                                                R"({"record_id":"r2","image_id":"i","event":"e","place":"","persons":[],"intent":[],"before":[],"after":[]})"
                                                "\n\n"
                                                R"({"record_id":"r3","image_id":"i","event":"e","place":"","persons":[],"intent":[],"before":[],"after":[]})"
                                                "\n");
  const auto recs = load_records(good);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[2].record_id, "r3");

  const auto bad = temp_file("bad.jsonl", std::string(kLine) + "\n{not json\n");
  try {
    load_records(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  const auto dup = temp_file("dup.jsonl", std::string(kLine) + "\n" + kLine + "\n");
  EXPECT_THROW(load_records(dup), ParseError);
  EXPECT_THROW(load_records("/nonexistent/records.jsonl"), Error);
}

TEST(Records, SaveLoadRoundTrip) {
  const auto recs = fixture_records({.records = 50});
  const auto path = temp_file("fixture.jsonl", "");
  save_records(path, recs);
  EXPECT_EQ(load_records(path), recs);
}

TEST(Records, FixtureCorpusLoadsCleanly) {
  const auto dir = fs::temp_directory_path() / "ctxprompt-dataset-fixture";
  const auto paths = write_fixtures(dir);
  EXPECT_EQ(load_records(paths.records).size(), 2000u);
}

TEST(Subsample, CountModeMatchesPaperScaleBudget) {
  const auto spec = SubsampleSpec::count(25000, 1);
  EXPECT_EQ(spec.target_size(111796), 25000u);
  const auto idx = subsample_indices(111796, spec);
  EXPECT_EQ(idx.size(), 25000u);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  EXPECT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end());
}

TEST(Subsample, FractionOneIsIdentity) {
  const auto recs = fixture_records({.records = 30});
  EXPECT_EQ(subsample(recs, SubsampleSpec::fraction(1.0, 99)), recs);
}

TEST(Subsample, RoundHalfUpAndDeterministic) {
  const auto recs = fixture_records({.records = 10});
  const auto a = subsample(recs, SubsampleSpec::fraction(0.35, 7));
  const auto b = subsample(recs, SubsampleSpec::fraction(0.35, 7));
  EXPECT_EQ(a.size(), 4u);
  EXPECT_EQ(a, b);
  std::size_t pos = 0;
  for (const auto& r : a) {
    while (pos < recs.size() && recs[pos].record_id != r.record_id) ++pos;
    ASSERT_LT(pos, recs.size()) << "output is not a subsequence of the input";
  }
}

TEST(Subsample, RejectsInvalidSpecs) {
  EXPECT_THROW(SubsampleSpec::count(11, 0).target_size(10), ValidationError);
  EXPECT_THROW(SubsampleSpec::fraction(0.0, 0).target_size(10), ValidationError);
  EXPECT_THROW(SubsampleSpec::fraction(1.5, 0).target_size(10), ValidationError);
  EXPECT_THROW(SubsampleSpec::parse("half", 0), Error);
  EXPECT_EQ(SubsampleSpec::parse("count:25", 0).target_size(100), 25u);
  EXPECT_EQ(SubsampleSpec::parse("fraction:0.25", 0).to_string(), "fraction:0.25");
}

TEST(Subsample, SelectionIsRoughlyUniform) {
  std::vector<int> hits(20, 0);
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    for (auto i : subsample_indices(20, SubsampleSpec::count(5, seed))) ++hits[i];
  }
  for (int h : hits) EXPECT_NEAR(h, 500, 90);
}

TEST(Persons, FindsTagsInFirstOccurrenceOrder) {
  auto ids = [](std::string_view s) {
    std::vector<int> out;
    for (const auto& p : persons_in_text(s)) out.push_back(p.id);
    return out;
  };
  EXPECT_EQ(ids("Person-4 is sitting on the couch"), std::vector<int>{4});
  EXPECT_TRUE(ids("In a living room").empty());
  EXPECT_EQ(ids("Person-2 hands Person-1 a cup while Person-2 smiles"), (std::vector<int>{2, 1}));
  EXPECT_EQ(ids("person-12 and PERSON-3"), (std::vector<int>{12, 3}));
  EXPECT_TRUE(ids("Person-0 xPerson-1 Person-1x Person-01").empty());
}
