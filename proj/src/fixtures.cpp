#include "ctxprompt/fixtures.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include <json.hpp>

#include "ctxprompt/error.hpp"
#include "ctxprompt/rng.hpp"
#include "ctxprompt/text.hpp"

namespace ctxprompt {

namespace fs = std::filesystem;

namespace {

struct Place {
  const char* noun;
  const char* phrase;
};

constexpr std::array<const char*, 12> kObjects = {"cake",  "ball", "book",   "guitar",
                                                  "kite",  "letter", "phone", "cup",
                                                  "bike",  "camera", "dog",   "hat"};
constexpr std::array<const char*, 4> kVerbs = {"holds", "looks at", "picks up", "carries"};
constexpr std::array<Place, 8> kPlaces = {{{"kitchen", "in a kitchen"},
                                           {"park", "at a park"},
                                           {"office", "in an office"},
                                           {"street", "on a street"},
                                           {"beach", "at a beach"},
                                           {"garden", "in a garden"},
                                           {"station", "at a station"},
                                           {"classroom", "in a classroom"}}};
constexpr std::array<const char*, 3> kBystanderEmotions = {"neutral", "angry", "surprise"};

// Two properties per object; the concept providers have something to say but
// nothing that predicts the inference.
constexpr std::array<std::array<const char*, 2>, 12> kObjectProperties = {{{"sweet", "soft"},
                                                                           {"round", "bouncy"},
                                                                           {"paper", "heavy"},
                                                                           {"wooden", "loud"},
                                                                           {"colorful", "light"},
                                                                           {"folded", "white"},
                                                                           {"small", "bright"},
                                                                           {"ceramic", "warm"},
                                                                           {"fast", "metal"},
                                                                           {"black", "expensive"},
                                                                           {"furry", "friendly"},
                                                                           {"wool", "tall"}}};

constexpr std::array<std::array<const char*, 2>, 12> kObjectParts = {{{"cake", "dessert table"},
                                                                      {"ball", "game"},
                                                                      {"book", "library"},
                                                                      {"guitar", "band"},
                                                                      {"kite", "festival"},
                                                                      {"letter", "mail"},
                                                                      {"phone", "desk"},
                                                                      {"cup", "tea set"},
                                                                      {"bike", "garage"},
                                                                      {"camera", "studio"},
                                                                      {"dog", "family"},
                                                                      {"hat", "outfit"}}};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

struct Hidden {
  bool happy;
  bool sunny;
  std::size_t object;
  std::size_t place;
  bool extra_person;
};

std::vector<Hidden> draw_hidden(const FixtureOptions& options) {
  SplitMix64 rng(derive_seed(options.seed, "fixtures"));
  std::vector<Hidden> out;
  out.reserve(options.records);
  for (std::size_t i = 0; i < options.records; ++i) {
    Hidden h{};
    h.happy = rng.uniform_below(2) == 0;
    h.sunny = rng.uniform_below(2) == 0;
    h.object = rng.uniform_below(kObjects.size());
    h.place = rng.uniform_below(kPlaces.size());
    h.extra_person = rng.uniform01() < options.extra_person_rate;
    out.push_back(h);
  }
  return out;
}

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i + 1);
  return buf;
}

}  // namespace

std::vector<EventRecord> fixture_records(const FixtureOptions& options) {
  const auto hidden = draw_hidden(options);
  SplitMix64 rng(derive_seed(options.seed, "fixture-text"));
  std::vector<EventRecord> out;
  out.reserve(hidden.size());
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    const auto& h = hidden[i];
    const std::string obj = kObjects[h.object];
    const auto& place = kPlaces[h.place];
    EventRecord r;
    r.record_id = numbered("rec-", i);
    r.image_id = numbered("img-", i);
    r.event_text = std::string("Person-1 ") + kVerbs[rng.uniform_below(kVerbs.size())] + " the " + obj;
    r.place_text = place.phrase;
    r.persons = {PersonTag{1}};
    if (h.extra_person) r.persons.push_back(PersonTag{2});
    r.references(Relation::Intent) = {(h.happy ? "celebrate with the " : "cry over the ") + obj};
    r.references(Relation::Before) = {(h.sunny ? "walked to the " : "ran to the ") +
                                      std::string(place.noun)};
    r.references(Relation::After) = {(h.sunny ? "go outside with the " : "stay inside with the ") + obj};
    if (rng.uniform01() < options.empty_relation_rate) {
      r.references(kRelations[rng.uniform_below(kRelations.size())]).clear();
    }
    out.push_back(std::move(r));
  }
  return out;
}

FixturePaths write_fixtures(const fs::path& dir, const FixtureOptions& options) {
  fs::create_directories(dir);
  FixturePaths paths{dir / "records.jsonl", dir / "graph.csv",   dir / "captions.tsv",
                     dir / "emotions.csv",  dir / "lexicon.json", dir / "context.kv",
                     dir / "baseline.kv",   dir / "grid.kv"};
  const auto hidden = draw_hidden(options);
  const auto records = fixture_records(options);
  save_records(paths.records, records);

  SplitMix64 rng(derive_seed(options.seed, "fixture-sidecars"));
  std::string captions, emotions = "image_id,person_id,emotion\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& h = hidden[i];
    const auto& r = records[i];
    captions += r.image_id + "\ta person with a " + kObjects[h.object] + " on a " +
                (h.sunny ? "sunny" : "rainy") + " day\n";
    emotions += r.image_id + ",1," + (h.happy ? "happy" : "sad") + "\n";
    if (h.extra_person) {
      emotions += r.image_id + ",2," +
                  kBystanderEmotions[rng.uniform_below(kBystanderEmotions.size())] + "\n";
    }
  }
  write_file(paths.captions, captions);
  write_file(paths.emotions, emotions);

  std::string graph = "subject,predicate,object,weight\n";
  char weight[16];
  for (std::size_t o = 0; o < kObjects.size(); ++o) {
    for (std::size_t j = 0; j < 2; ++j) {
      std::snprintf(weight, sizeof weight, "%.1f", 2.0 - static_cast<double>(j) * 0.5);
      graph += std::string(kObjects[o]) + ",HasProperty," + kObjectProperties[o][j] + "," + weight + "\n";
    }
    graph += std::string(kObjectParts[o][0]) + ",PartOf," + kObjectParts[o][1] + ",1.0\n";
  }
  for (const auto& p : kPlaces) graph += std::string(p.noun) + ",HasProperty,busy,0.5\n";
  write_file(paths.graph, graph);

  nlohmann::ordered_json lex = nlohmann::ordered_json::object();
  lex["sweet"] = {"sugary"};
  lex["round"] = {"circular"};
  lex["loud"] = {"noisy"};
  lex["small"] = {"little"};
  lex["fast"] = {"quick"};
  lex["friendly"] = {"kind"};
  write_file(paths.lexicon, lex.dump(2) + "\n");

  const std::string model =
      "layers = 1\nheads = 2\nembed_dim = 32\nmax_len = 48\nvisual_dim = 0\nmlp_ratio = 2\n"
      "optimizer = adam\nlearning_rate = 0.003\nbatch_size = 8\nclip_norm = 1\nepochs = 5\n"
      "p = 0.9\nnum_samples = 5\nmax_new_tokens = 8\neval_size = 100\nseed = 1\n";
  const std::string inputs =
      "records = records.jsonl\ngraph = graph.csv\ncaptions = captions.tsv\n"
      "emotions = emotions.csv\nlexicon = lexicon.json\n";
  write_file(paths.experiment_context, "# context providers in training and generation\nname = context\n" +
                                           inputs + model + "train_chain = C + FE\ninfer_chain = C + FE\n");
  write_file(paths.experiment_baseline,
             "# no context\nname = baseline\n" + inputs + model + "train_chain = None\ninfer_chain = None\n");

  std::string grid = "# budget sweep: two prompt plans x four training budgets\n" + inputs + model + "\n";
  const std::array<std::pair<const char*, const char*>, 4> budgets = {
      {{"22", "0.22"}, {"35", "0.35"}, {"40", "0.40"}, {"100", "1"}}};
  for (const auto& [label, frac] : budgets) {
    grid += std::string("[context-") + label + "]\ntrain_chain = C + FE\ninfer_chain = C + FE\nsubsample = fraction:" +
            frac + "\n\n";
  }
  for (const auto& [label, frac] : budgets) {
    grid += std::string("[none-") + label + "]\ntrain_chain = None\ninfer_chain = None\nsubsample = fraction:" +
            frac + "\n\n";
  }
  write_file(paths.grid, grid);
  return paths;
}

double first_token_accuracy(const std::vector<EventRecord>& records, const Generations& generations) {
  std::map<std::string, const EventRecord*> by_id;
  for (const auto& r : records) by_id[r.record_id] = &r;
  std::size_t hits = 0, total = 0;
  for (const auto& [key, texts] : generations) {
    auto it = by_id.find(key.first);
    if (it == by_id.end()) throw ValidationError("generation for unknown record '" + key.first + "'");
    std::set<std::string> firsts;
    for (const auto& ref : it->second->references(key.second)) {
      const auto toks = text::scoring_tokens(ref);
      if (!toks.empty()) firsts.insert(toks.front());
    }
    if (firsts.empty()) continue;
    for (const auto& t : texts) {
      const auto toks = text::scoring_tokens(t);
      ++total;
      if (!toks.empty() && firsts.contains(toks.front())) ++hits;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace ctxprompt
