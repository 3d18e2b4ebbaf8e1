#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "ctxprompt/dataset.hpp"
#include "ctxprompt/error.hpp"
#include "ctxprompt/knowledge.hpp"
#include "oracles.hpp"
#include "random_cases.hpp"

using namespace ctxprompt;

namespace {

KnowledgeGraph graph_from(const std::string& csv) {
  std::istringstream in(csv);
  return parse_graph(in);
}

Triple T(std::string s, Predicate::Kind k, std::string o, double w = 1.0) {
  return {std::move(s), Predicate(k), std::move(o), w};
}

}  // namespace

TEST(Graph, ParsesRowsAndOptionalHeader) {
  const auto g = graph_from("subject,predicate,object,weight\ncaviar,HasProperty,luxurious,3.2\n");
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g.triples()[0].subject, "caviar");
  EXPECT_EQ(g.triples()[0].object, "luxurious");
  EXPECT_DOUBLE_EQ(g.triples()[0].weight, 3.2);
  EXPECT_TRUE(g.has_subject("caviar"));
}

TEST(Graph, EmptyInputGivesEmptyGraph) {
  const auto g = graph_from("");
  EXPECT_TRUE(g.empty());
  EXPECT_TRUE(match_concepts("anything at all", g, {}).empty());
}

TEST(Graph, UnknownPredicateBecomesOtherAndIsOnlySelectedWhenRequested) {
  const auto g = graph_from("dove,SymbolOf,peace,2\ndove,HasProperty,white,1\n");
  EXPECT_EQ(g.triples()[0].predicate.kind(), Predicate::Kind::Other);
  EXPECT_EQ(g.triples()[0].predicate.name(), "SymbolOf");
  const auto m = match_concepts("a dove", g, {});
  EXPECT_EQ(select_triples(m, {Predicate(Predicate::Kind::HasProperty)}, 5).size(), 1u);
  const auto sel = select_triples(m, {Predicate::from_name("SymbolOf")}, 5);
  ASSERT_EQ(sel.size(), 1u);
  EXPECT_EQ(sel[0].object, "peace");
}

TEST(Graph, RejectsMalformedRowsWithLineNumbers) {
  try {
    graph_from("a,IsA,b,1\na,IsA,c\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(graph_from("a,IsA,b,-1\n"), ParseError);
  EXPECT_THROW(graph_from("a,IsA,a,1\n"), ParseError);
  EXPECT_THROW(graph_from("a,HasA,b,x\n"), ParseError);
}

TEST(Graph, SubjectIndexIsConsistent) {
  const auto g = graph_from("Dining_Room,AtLocation,house,1\ndining room,HasA,table,2\ncar,IsA,vehicle,1\n");
  EXPECT_EQ(g.subjects(), (std::set<std::string>{"car", "dining room"}));
  EXPECT_EQ(g.by_subject("dining room").size(), 2u);
  EXPECT_TRUE(g.by_subject("boat").empty());
  EXPECT_EQ(g.max_subject_words(), 2u);
}

TEST(Matcher, FindsSingleConcept) {
  const auto g = graph_from("caviar,HasProperty,luxurious,3.2\n");
  const std::string text = "scooping up a heap of caviar";
  const auto m = match_concepts(text, g, default_stopwords());
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].surface, "caviar");
  EXPECT_EQ(text.substr(m[0].start, m[0].end - m[0].start), "caviar");
  EXPECT_EQ(m[0].triples.size(), 1u);
}

TEST(Matcher, LongestMatchWins) {
  const auto g = graph_from("dining,IsA,activity,1\ndining room,IsA,room,1\n");
  const auto m = match_concepts("in a Dining Room", g, {});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].surface, "Dining Room");
}

TEST(Matcher, ExclusionsNeverMatch) {
  const auto g = graph_from("person-4,IsA,human,1\nsits,HasProperty,still,1\n");
  EXPECT_TRUE(match_concepts("Person-4 sits", g, {"person-4", "sits"}).empty());
  EventRecord r;
  r.persons = {PersonTag{4}};
  EXPECT_TRUE(default_exclusions(r).count("person-4"));
  EXPECT_EQ(default_stopwords().size(), 50u);
}

TEST(Matcher, RespectsWordBoundaries) {
  const auto g = graph_from("cat,IsA,animal,1\n");
  EXPECT_TRUE(match_concepts("concatenate category", g, {}).empty());
  EXPECT_EQ(match_concepts("cat, cat.", g, {}).size(), 2u);
}

TEST(Matcher, EqualsBruteForceOnRandomCases) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto c = cases::matcher_case(seed);
    const auto got = match_concepts(c.text, c.graph, c.exclusions);
    const auto want = oracle::longest_phrases(c.text, c.words, cases::allowed_phrases(c));
    ASSERT_EQ(got.size(), want.size()) << "seed " << seed << ": " << c.text;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].start, want[i].start) << "seed " << seed;
      EXPECT_EQ(got[i].end, want[i].end) << "seed " << seed;
    }
  }
}

TEST(Select, HighestWeightFirst) {
  const auto g = graph_from("a,HasProperty,x,3.2\na,HasProperty,y,1.1\n");
  const auto sel = select_triples(match_concepts("a", g, {}), {Predicate(Predicate::Kind::HasProperty)}, 1);
  ASSERT_EQ(sel.size(), 1u);
  EXPECT_DOUBLE_EQ(sel[0].weight, 3.2);
  EXPECT_TRUE(select_triples({}, {Predicate(Predicate::Kind::HasProperty)}, 5).empty());
}

TEST(Select, TiesBrokenBySubjectPredicateObject) {
  const auto g = graph_from("bed,HasProperty,soft,1\napple,PartOf,tree,1\napple,HasProperty,red,1\n");
  const auto sel = select_triples(match_concepts("bed apple", g, {}),
                                  {Predicate(Predicate::Kind::HasProperty), Predicate(Predicate::Kind::PartOf)}, 5);
  ASSERT_EQ(sel.size(), 3u);
  EXPECT_EQ(sel[0], T("apple", Predicate::Kind::HasProperty, "red"));
  EXPECT_EQ(sel[1], T("apple", Predicate::Kind::PartOf, "tree"));
  EXPECT_EQ(sel[2].subject, "bed");
}

TEST(Select, PermutationInvariant) {
  std::vector<Triple> pool;
  SplitMix64 rng(5);
  for (int i = 0; i < 30; ++i) {
    pool.push_back(T("s" + std::to_string(rng.uniform_below(4)),
                     rng.uniform_below(2) ? Predicate::Kind::HasProperty : Predicate::Kind::PartOf,
                     "o" + std::to_string(rng.uniform_below(6)), static_cast<double>(rng.uniform_below(3))));
  }
  const std::vector<Predicate> preds = {Predicate(Predicate::Kind::HasProperty), Predicate(Predicate::Kind::PartOf)};
  ConceptMatch m;
  m.triples = pool;
  const auto base = select_triples({m}, preds, 7);
  for (int rep = 0; rep < 20; ++rep) {
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.uniform_below(i)]);
    m.triples = pool;
    EXPECT_EQ(select_triples({m}, preds, 7), base);
  }
}

TEST(Render, SentenceTemplates) {
  using K = Predicate::Kind;
  EXPECT_EQ(render({T("caviar", K::HasProperty, "luxurious")}, RenderMode::Sentences).text,
            "caviar is luxurious.");
  EXPECT_EQ(render_sentence(T("dog", K::IsA, "pet")), "dog is a pet.");
  EXPECT_EQ(render_sentence(T("couch", K::PartOf, "living room")), "couch is a part of living room.");
  EXPECT_EQ(render_sentence(T("dog", K::HasA, "tail")), "dog has tail.");
  EXPECT_EQ(render_sentence(T("dog", K::CapableOf, "bark")), "dog can bark.");
  EXPECT_EQ(render_sentence(T("fork", K::AtLocation, "kitchen")), "fork can be found at kitchen.");
  EXPECT_EQ(render_sentence({"dove", Predicate::from_name("SymbolOf"), "peace", 1}), "dove SymbolOf peace.");
  const auto two = render({T("a", K::HasA, "b"), T("c", K::IsA, "d")}, RenderMode::Sentences);
  EXPECT_EQ(two.text, "a has b. c is a d.");
  EXPECT_EQ(two.provenance.size(), 2u);
}

TEST(Render, WordsDeduplicateObjects) {
  using K = Predicate::Kind;
  const auto t = render({T("couch", K::PartOf, "living room"), T("couch", K::PartOf, "living room")}, RenderMode::Words);
  EXPECT_EQ(t.text, "living room.");
  EXPECT_EQ(render({T("a", K::HasA, "x"), T("b", K::HasA, "y"), T("c", K::HasA, "x")}, RenderMode::Words).text,
            "x, y.");
  EXPECT_TRUE(render({}, RenderMode::Words).empty());
  EXPECT_TRUE(render({}, RenderMode::Sentences).empty());
}
