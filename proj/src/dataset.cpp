#include "ctxprompt/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "ctxprompt/error.hpp"
#include "ctxprompt/rng.hpp"
#include "ctxprompt/text.hpp"

namespace ctxprompt {

using ordered_json = nlohmann::ordered_json;

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::Intent: return "intent";
    case Relation::Before: return "before";
    case Relation::After: return "after";
  }
  return "intent";
}

std::optional<Relation> parse_relation(std::string_view name) {
  for (auto r : kRelations) {
    if (relation_name(r) == name) return r;
  }
  return std::nullopt;
}

std::string PersonTag::surface() const { return "Person-" + std::to_string(id); }

void validate_record(const EventRecord& record) {
  const auto fail = [&](const std::string& what) {
    throw ValidationError("record '" + record.record_id + "': " + what);
  };
  if (record.record_id.empty()) throw ValidationError("record with empty record_id");
  if (text::trim(record.event_text).empty()) fail("event text is empty");
  for (const auto& tag : record.persons) {
    if (tag.id < 1) fail("person tag " + std::to_string(tag.id) + " is not positive");
  }
  for (const auto& mentioned : persons_in_text(record.event_text)) {
    if (std::find(record.persons.begin(), record.persons.end(), mentioned) ==
        record.persons.end()) {
      fail("event text mentions " + mentioned.surface() + " which is not in persons");
    }
  }
  for (auto r : kRelations) {
    for (const auto& ref : record.references(r)) {
      if (text::trim(ref).empty()) {
        fail("empty reference for relation " + std::string(relation_name(r)));
      }
    }
  }
}

namespace {

std::vector<PersonTag> parse_persons(const ordered_json& value) {
  std::vector<PersonTag> persons;
  const auto push = [&](long long id) {
    if (id < 1) throw ValidationError("person tag " + std::to_string(id) + " is not positive");
    persons.push_back(PersonTag{static_cast<int>(id)});
  };
  if (value.is_array()) {
    for (const auto& v : value) {
      if (!v.is_number_integer()) throw ValidationError("persons entries must be integers");
      push(v.get<long long>());
    }
  } else if (value.is_string()) {
    std::istringstream in(value.get<std::string>());
    std::string token;
    while (in >> token) {
      if (token.empty() ||
          !std::all_of(token.begin(), token.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; })) {
        throw ValidationError("persons token '" + token + "' is not an integer");
      }
      push(std::stoll(token));
    }
  } else {
    throw ValidationError("persons must be an array of integers or a string of integers");
  }
  return persons;
}

std::string require_string(const ordered_json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError(std::string("missing key '") + key + "'");
  if (!it->is_string()) throw ValidationError(std::string("key '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

EventRecord parse_record(std::string_view line, const std::string& source, std::size_t line_no) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, line_no, std::string("malformed record: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError(source, line_no, "record is not an object");
  try {
    EventRecord rec;
    rec.record_id = require_string(doc, "record_id");
    rec.image_id = require_string(doc, "image_id");
    rec.event_text = require_string(doc, "event");
    rec.place_text = require_string(doc, "place");
    auto persons = doc.find("persons");
    if (persons == doc.end()) throw ValidationError("missing key 'persons'");
    rec.persons = parse_persons(*persons);
    for (auto r : kRelations) {
      const std::string key(relation_name(r));
      auto it = doc.find(key);
      if (it == doc.end()) throw ValidationError("missing key '" + key + "'");
      if (!it->is_array()) throw ValidationError("key '" + key + "' must be an array");
      for (const auto& v : *it) {
        if (!v.is_string()) throw ValidationError("key '" + key + "' must hold strings");
        rec.references(r).push_back(v.get<std::string>());
      }
    }
    validate_record(rec);
    return rec;
  } catch (const ValidationError& e) {
    throw ParseError(source, line_no, e.what());
  }
}

std::string format_record(const EventRecord& record) {
  ordered_json doc;
  doc["record_id"] = record.record_id;
  doc["image_id"] = record.image_id;
  doc["event"] = record.event_text;
  doc["place"] = record.place_text;
  auto persons = ordered_json::array();
  for (const auto& p : record.persons) persons.push_back(p.id);
  doc["persons"] = std::move(persons);
  for (auto r : kRelations) {
    doc[std::string(relation_name(r))] = record.references(r);
  }
  return doc.dump();
}

std::vector<EventRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open record file " + path.string());
  std::vector<EventRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto rec = parse_record(line, path.string(), line_no);
    if (!seen.insert(rec.record_id).second) {
      throw ParseError(path.string(), line_no, "duplicate record_id '" + rec.record_id + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_records(const std::filesystem::path& path, const std::vector<EventRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write record file " + path.string());
  for (const auto& r : records) out << format_record(r) << '\n';
}

SubsampleSpec SubsampleSpec::count(std::size_t k, std::uint64_t seed) {
  return {Mode::Count, static_cast<double>(k), seed};
}

SubsampleSpec SubsampleSpec::fraction(double f, std::uint64_t seed) {
  return {Mode::Fraction, f, seed};
}

SubsampleSpec SubsampleSpec::parse(std::string_view text_spec, std::uint64_t seed) {
  const auto colon = text_spec.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError("subsample spec must be count:<n> or fraction:<f>, got '" +
                      std::string(text_spec) + "'");
  }
  const auto mode = text_spec.substr(0, colon);
  const std::string value(text_spec.substr(colon + 1));
  try {
    std::size_t used = 0;
    if (mode == "count") {
      const long long k = std::stoll(value, &used);
      if (used != value.size() || k < 1) throw ConfigError("count must be a positive integer");
      return count(static_cast<std::size_t>(k), seed);
    }
    if (mode == "fraction") {
      const double f = std::stod(value, &used);
      if (used != value.size()) throw ConfigError("fraction is not a number");
      if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fraction must lie in (0, 1]");
      return fraction(f, seed);
    }
  } catch (const std::logic_error&) {
    throw ConfigError("bad subsample value '" + value + "'");
  }
  throw ConfigError("unknown subsample mode '" + std::string(mode) + "'");
}

std::string SubsampleSpec::to_string() const {
  std::ostringstream out;
  if (mode == Mode::Count) {
    out << "count:" << static_cast<std::size_t>(value);
  } else {
    out.precision(17);
    out << "fraction:" << value;
  }
  return out.str();
}

std::size_t SubsampleSpec::target_size(std::size_t n) const {
  if (mode == Mode::Count) {
    if (value < 1.0 || value != std::floor(value)) {
      throw ValidationError("subsample count must be a positive integer");
    }
    const auto k = static_cast<std::size_t>(value);
    if (k > n) {
      throw ValidationError("subsample count " + std::to_string(k) + " exceeds corpus size " +
                            std::to_string(n));
    }
    return k;
  }
  if (!(value > 0.0 && value <= 1.0)) throw ValidationError("subsample fraction outside (0, 1]");
  // round half up
  const auto k = static_cast<std::size_t>(std::floor(value * static_cast<double>(n) + 0.5));
  return std::min(k, n);
}

std::vector<std::size_t> subsample_indices(std::size_t n, const SubsampleSpec& spec) {
  const std::size_t k = spec.target_size(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(spec.seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(n - i));
    std::swap(order[i], order[j]);
  }
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<EventRecord> subsample(const std::vector<EventRecord>& records,
                                   const SubsampleSpec& spec) {
  std::vector<EventRecord> out;
  for (auto i : subsample_indices(records.size(), spec)) out.push_back(records[i]);
  return out;
}

std::vector<PersonTag> persons_in_text(std::string_view s) {
  static constexpr std::string_view kPrefix = "person-";
  std::vector<PersonTag> found;
  const auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t i = 0; i + kPrefix.size() < s.size(); ++i) {
    if (i > 0 && alnum(s[i - 1])) continue;
    bool prefix = true;
    for (std::size_t k = 0; k < kPrefix.size(); ++k) {
      if (std::tolower(static_cast<unsigned char>(s[i + k])) != kPrefix[k]) {
        prefix = false;
        break;
      }
    }
    if (!prefix) continue;
    std::size_t j = i + kPrefix.size();
    const std::size_t digits_begin = j;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    if (j == digits_begin || s[digits_begin] == '0') continue;
    if (j < s.size() && alnum(s[j])) continue;
    if (j - digits_begin > 9) continue;
    const PersonTag tag{std::stoi(std::string(s.substr(digits_begin, j - digits_begin)))};
    if (std::find(found.begin(), found.end(), tag) == found.end()) found.push_back(tag);
    i = j - 1;
  }
  return found;
}

}  // namespace ctxprompt
