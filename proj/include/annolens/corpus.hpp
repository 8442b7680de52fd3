#pragma once

// Disaggregated annotation datasets: items, annotators with typed
// characteristics, and ordinal labels in a partially cross-classified layout.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace annolens::corpus {

enum class CharType { nominal, ordinal, interval };

std::string_view to_string(CharType type);
CharType char_type_from_string(std::string_view s);

struct CharacteristicSpec {
  std::string name;
  CharType type = CharType::nominal;
  /// Ordinal: level order (required). Nominal: optional closed level set.
  std::vector<std::string> levels;
  /// Nominal only.
  std::string reference;
  /// Sentinels treated like a missing answer for this characteristic only.
  std::vector<std::string> pna_tokens;
};

struct Schema {
  int scale_size = 5;
  std::vector<CharacteristicSpec> characteristics;
  std::vector<std::string> pna_tokens;
  /// Characters separating multiple answers in one cell.
  std::string multi_delimiters = ";,";

  const CharacteristicSpec* find(std::string_view name) const;
};

Schema schema_from_json(const nlohmann::json& j);
nlohmann::json schema_to_json(const Schema& schema);
Schema load_schema(const std::string& path);

struct AnnotationRecord {
  std::string item_id;
  std::string annotator_id;
  int label = 0;
};

struct AnnotatorProfile {
  std::string annotator_id;
  std::map<std::string, std::string> characteristics;

  bool operator==(const AnnotatorProfile&) const = default;
};

struct ItemRecord {
  std::string item_id;
  std::string text;
};

/// Profiles straight from load_dataset may repeat an annotator id;
/// drop_conflicting_annotators resolves those rows.
struct Dataset {
  Schema schema;
  std::vector<ItemRecord> items;
  std::vector<AnnotatorProfile> annotators;
  std::vector<AnnotationRecord> annotations;
};

struct DatasetSummary {
  std::size_t items = 0;
  std::size_t annotations = 0;
  std::size_t annotators = 0;
  double mean_annotators_per_item = 0.0;
  double sd_annotators_per_item = 0.0;
};

Dataset load_dataset(const std::string& annotation_file, const std::string& profile_file,
                     const std::string& item_file, const Schema& schema, char delimiter = ',');

/// Writes annotations.csv, profiles.csv, items.csv and schema.json into `dir`.
void write_dataset(const Dataset& ds, const std::string& dir);
Dataset read_dataset_dir(const std::string& dir);

/// Full scan: unique (item, annotator) pairs, labels in 1..K, no dangling
/// references. Throws DataError on the first violation.
void check_integrity(const Dataset& ds);

/// Messages for every profile value that does not match its schema type.
std::vector<std::string> schema_violations(const Dataset& ds);

Dataset drop_missing_and_pna(const Dataset& ds, const std::vector<std::string>& pna_tokens);
Dataset drop_conflicting_annotators(const Dataset& ds);
Dataset filter_by_participation(const Dataset& ds, std::size_t min_items_per_annotator = 10,
                                std::size_t min_annotators_per_item = 3);

inline constexpr std::string_view kDrop = "DROP";

struct RecodeMap {
  std::string characteristic;
  std::map<std::string, std::string> mapping;
  bool exhaustive = false;
  /// Multi-answer values whose canonical form is not in `keep` map here.
  std::optional<std::string> catch_all;
  std::set<std::string> keep;
};

/// Reads `characteristic,raw,harmonized` rows. Directive rows use a raw value
/// of `@exhaustive`, `@catch_all` (harmonized = target) or `@keep`
/// (harmonized = a multi-answer combination to keep).
std::vector<RecodeMap> load_recode_maps(const std::string& path, char delimiter = ',');

/// Sorted, deduplicated answers joined by ';'.
std::string canonical_multi_answer(std::string_view value, std::string_view delimiters);

/// The `k` most frequent multi-answer combinations with exactly `arity`
/// answers, most frequent first.
std::vector<std::string> top_multi_combinations(const Dataset& ds, std::string_view characteristic,
                                                std::size_t arity, std::size_t k);

Dataset recode(const Dataset& ds, const std::vector<RecodeMap>& maps);
Dataset drop_multi_membership(const Dataset& ds, std::string_view characteristic);

DatasetSummary summarize(const Dataset& ds);

/// The first part gets floor(fraction * n) annotators.
std::pair<Dataset, Dataset> split_annotators(const Dataset& ds, double fraction, std::uint64_t seed);

struct BatchSubsets {
  std::vector<Dataset> subsets;
  std::vector<std::string> warnings;
};

/// Groups items by the exact set of annotators who labelled them and packs
/// each group into chunks of at most `subset_size` items.
BatchSubsets batch_subsets(const Dataset& ds, std::size_t subset_size, std::size_t n_subsets,
                           std::uint64_t seed);

/// Removes the given annotators and every annotation they made.
Dataset without_annotators(const Dataset& ds, const std::set<std::string>& annotator_ids);

std::set<std::string> annotator_ids(const Dataset& ds);

}  // namespace annolens::corpus
