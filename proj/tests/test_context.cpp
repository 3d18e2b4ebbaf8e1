#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctxprompt/context.hpp"
#include "ctxprompt/error.hpp"

using namespace ctxprompt;
namespace fs = std::filesystem;

namespace {

EventRecord record(std::string event, std::vector<int> persons = {}, std::string place = "") {
  EventRecord r;
  r.record_id = "r";
  r.image_id = "img1";
  r.event_text = std::move(event);
  r.place_text = std::move(place);
  for (int p : persons) r.persons.push_back(PersonTag{p});
  return r;
}

fs::path temp_file(const std::string& name, const std::string& content) {
  const auto dir = fs::temp_directory_path() / "ctxprompt-context-test";
  fs::create_directories(dir);
  std::ofstream(dir / name, std::ios::binary) << content;
  return dir / name;
}

struct Fixture {
  KnowledgeGraph graph;
  CaptionSidecar captions{{{"img1", "a woman sits on a couch"}}};
  FESidecar emotions{{{{"img1", 4}, "happy"}, {{"img1", 2}, "sad"}, {{"img1", 1}, "neutral"}}};
  SynonymLexicon lexicon{{{"soft", {"cushy", "plush"}}, {"comfortable", {"cozy"}}}};

  Fixture() {
    std::istringstream in("couch,HasProperty,soft,2\ncouch,PartOf,living room,1\nroom,HasProperty,comfortable,1\n");
    graph = parse_graph(in);
  }
  ContextResources resources() const {
    ContextResources r;
    r.graph = &graph;
    r.captions = &captions;
    r.emotions = &emotions;
    r.lexicon = &lexicon;
    return r;
  }
};

}  // namespace

TEST(Captions, AppendsTerminatorOnce) {
  Fixture f;
  EXPECT_EQ(caption_context(record("e"), f.captions).text, "a woman sits on a couch.");
  CaptionSidecar done{{{"img1", "already done."}}};
  EXPECT_EQ(caption_context(record("e"), done).text, "already done.");
  auto missing = record("e");
  missing.image_id = "other";
  EXPECT_TRUE(caption_context(missing, f.captions).empty());
}

TEST(FacialExpressions, OnlyMentionedPersonsInMentionOrder) {
  Fixture f;
  EXPECT_EQ(facial_expression_context(record("Person-4 smiles", {4}), f.emotions).text, "Person-4 looks happy.");
  EXPECT_TRUE(facial_expression_context(record("nobody here", {4}), f.emotions).empty());
  EXPECT_EQ(facial_expression_context(record("Person-2 greets Person-1", {1, 2}), f.emotions).text,
            "Person-2 looks sad. Person-1 looks neutral.");
  EXPECT_EQ(facial_expression_context(record("Person-2 waves", {1, 2}), f.emotions).text, "Person-2 looks sad.");
}

TEST(Synonyms, AppendsTopSynonymWithoutDuplicates) {
  SynonymLexicon lex{{{"sofa", {"couch"}}}};
  ContextText words{"sofa.", ProviderKind::ConceptWords, {}};
  EXPECT_EQ(synonym_context(words, lex).text, "sofa, couch.");
  ContextText both{"sofa, couch.", ProviderKind::ConceptWords, {}};
  EXPECT_EQ(synonym_context(both, lex).text, "sofa, couch.");
  EXPECT_EQ(synonym_context(words, SynonymLexicon{}).text, "sofa.");
  ContextText caption{"a caption.", ProviderKind::Captions, {}};
  EXPECT_THROW(synonym_context(caption, lex), ValidationError);
}

TEST(Concepts, WordsSentencesAndPlaceWords) {
  Fixture f;
  const auto res = f.resources();
  const auto r = record("Person-4 sits on the couch", {4}, "in a living room");
  EXPECT_EQ(concept_context(r, res, ProviderKind::ConceptWords).text, "soft, living room.");
  EXPECT_EQ(concept_context(r, res, ProviderKind::ConceptSentences).text,
            "couch is soft. couch is a part of living room.");
  EXPECT_EQ(concept_context(r, res, ProviderKind::PlaceConceptWords).text, "comfortable.");
  auto narrow = res;
  narrow.k = 1;
  EXPECT_EQ(concept_context(r, narrow, ProviderKind::ConceptWords).text, "soft.");
  narrow.place_predicates = std::vector<Predicate>{Predicate(Predicate::Kind::PartOf)};
  EXPECT_TRUE(concept_context(r, narrow, ProviderKind::PlaceConceptWords).empty());
}

TEST(Chain, FragmentsFollowChainOrder) {
  Fixture f;
  const auto res = f.resources();
  const auto r = record("Person-4 sits on the couch", {4});
  using K = ProviderKind;
  const auto a = build_context_chain(r, {K::ConceptWords, K::Captions, K::FacialExpressions}, res);
  EXPECT_EQ(a.text, "soft, living room. a woman sits on a couch. Person-4 looks happy.");
  const auto b = build_context_chain(r, {K::Captions, K::ConceptWords, K::FacialExpressions}, res);
  EXPECT_EQ(b.text, "a woman sits on a couch. soft, living room. Person-4 looks happy.");
  EXPECT_FALSE(a.kind.has_value());
  EXPECT_EQ(a.provenance.size(), b.provenance.size());
  EXPECT_TRUE(build_context_chain(r, {}, res).empty());
}

TEST(Chain, SynonymsAddOnlyNewWords) {
  Fixture f;
  const auto r = record("Person-4 sits on the couch", {4});
  const auto t = build_context_chain(r, {ProviderKind::ConceptWords, ProviderKind::Synonyms}, f.resources());
  EXPECT_EQ(t.text, "soft, living room. cushy.");
}

TEST(Chain, MissingResourcesDegradeToEmpty) {
  const auto r = record("Person-4 sits on the couch", {4});
  const auto t = build_context_chain(r, {ProviderKind::Captions, ProviderKind::ConceptWords}, ContextResources{});
  EXPECT_TRUE(t.empty());
}

TEST(Chain, LabelsRoundTrip) {
  using K = ProviderKind;
  const std::vector<K> chain = {K::ConceptWords, K::Captions, K::FacialExpressions};
  EXPECT_EQ(chain_label(chain), "CW + C + FE");
  EXPECT_EQ(parse_chain("CW + C + FE"), chain);
  EXPECT_EQ(chain_label({}), "None");
  EXPECT_TRUE(parse_chain("None").empty());
  EXPECT_EQ(chain_label({K::PlaceConceptWords, K::Synonyms, K::ConceptSentences}), "PCW + Syns + CS");
  EXPECT_THROW(parse_chain("CW + CW"), Error);
  EXPECT_THROW(parse_chain("XYZ"), ConfigError);
}

TEST(Sidecars, LoadersParseAndValidate) {
  const auto caps = load_captions(temp_file("c.tsv", "img1\ta cat\nimg2\ta dog.\n"));
  EXPECT_EQ(caps.captions.at("img2"), "a dog.");
  EXPECT_THROW(load_captions(temp_file("c2.tsv", "img1 no tab\n")), ParseError);

  const auto fe = load_emotions(temp_file("e.csv", "image_id,person_id,emotion\nimg1,3,fear\n"));
  EXPECT_EQ(fe.labels.at({"img1", 3}), "fear");
  EXPECT_THROW(load_emotions(temp_file("e2.csv", "img1,3,bored\n")), ParseError);

  const auto lex = load_lexicon(temp_file("l.json", R"({"sofa":["couch","settee"]})"));
  EXPECT_EQ(lex.entries.at("sofa").front(), "couch");
  EXPECT_THROW(load_lexicon(temp_file("l2.json", R"({"sofa":["sofa"]})")), ParseError);
  EXPECT_EQ(emotion_labels().size(), 7u);
}

TEST(WordLists, ParseAndFormat) {
  EXPECT_EQ(parse_word_list("a, b c, d."), (std::vector<std::string>{"a", "b c", "d"}));
  EXPECT_EQ(format_word_list({"a", "b c"}), "a, b c.");
  EXPECT_EQ(format_word_list({}), "");
}
