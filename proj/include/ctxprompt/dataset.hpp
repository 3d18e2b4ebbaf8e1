#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctxprompt {

enum class Relation { Intent = 0, Before = 1, After = 2 };

inline constexpr std::array<Relation, 3> kRelations = {Relation::Intent, Relation::Before,
                                                       Relation::After};

std::string_view relation_name(Relation r);
std::optional<Relation> parse_relation(std::string_view name);

struct PersonTag {
  int id = 1;

  // "Person-N"
  std::string surface() const;
  friend bool operator==(const PersonTag&, const PersonTag&) = default;
};

struct EventRecord {
  std::string record_id;
  std::string image_id;
  std::string event_text;
  std::string place_text;
  std::vector<PersonTag> persons;
  std::array<std::vector<std::string>, 3> inferences;

  const std::vector<std::string>& references(Relation r) const {
    return inferences[static_cast<std::size_t>(r)];
  }
  std::vector<std::string>& references(Relation r) {
    return inferences[static_cast<std::size_t>(r)];
  }
  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

// Throws ValidationError naming the record when an invariant is broken.
void validate_record(const EventRecord& record);

// Record line format (JSON object, one per line). Keys: record_id, image_id,
// event, place, persons, intent, before, after. Unknown keys are ignored.
// persons is an array of positive integers or a string of space-separated
// integers. The canonical form written by format_record() uses exactly the
// key order above, compact separators and arrays everywhere.
EventRecord parse_record(std::string_view line, const std::string& source = "<input>",
                         std::size_t line_no = 0);
std::string format_record(const EventRecord& record);

std::vector<EventRecord> load_records(const std::filesystem::path& path);
void save_records(const std::filesystem::path& path, const std::vector<EventRecord>& records);

struct SubsampleSpec {
  enum class Mode { Count, Fraction };
  Mode mode = Mode::Fraction;
  double value = 1.0;  // count (integral) or fraction in (0, 1]
  std::uint64_t seed = 0;

  static SubsampleSpec count(std::size_t k, std::uint64_t seed);
  static SubsampleSpec fraction(double f, std::uint64_t seed);

  // "count:25000" or "fraction:0.35"
  static SubsampleSpec parse(std::string_view text, std::uint64_t seed);
  std::string to_string() const;

  // Target size for a corpus of n records; throws ValidationError when invalid.
  std::size_t target_size(std::size_t n) const;
};

// Sorted indices of the selected records: the first k steps of a seeded
// Fisher-Yates shuffle over [0, n), then sorted ascending.
std::vector<std::size_t> subsample_indices(std::size_t n, const SubsampleSpec& spec);

std::vector<EventRecord> subsample(const std::vector<EventRecord>& records,
                                   const SubsampleSpec& spec);

// Distinct "Person-N" mentions (case-insensitive, word-bounded) in first
// occurrence order.
std::vector<PersonTag> persons_in_text(std::string_view text);

}  // namespace ctxprompt
