#pragma once

// Item-level linguistic and lexicon features.

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "annolens/lexicon.hpp"
#include "annolens/tokenize.hpp"

namespace annolens::lexfeat {

/// Columns are emitted per group. A group is either present for every item
/// or for none; see assemble().
enum class FeatureGroup {
  surface,
  lemma,
  readability,
  richness,
  information,
  norms,
  emotion,
  sentiment,
  domain,
  pos,
  morphology,
  dependency,
  chunks,
  entity,
  semantic,
  semantic_pos,
  hedges,
};

std::string_view to_string(FeatureGroup g);
FeatureGroup feature_group_from_string(std::string_view s);

struct Feature {
  std::string name;
  double value = 0.0;
  /// Occurrence count, divided by n_tokens during normalization.
  bool is_count = false;
  FeatureGroup group = FeatureGroup::surface;
};

struct NamedFeatures {
  std::vector<Feature> values;
  std::set<FeatureGroup> groups;
  std::vector<std::string> flags;

  void add(FeatureGroup g, std::string name, double value, bool is_count = false);
  void merge(NamedFeatures&& other);
  std::optional<double> get(std::string_view name) const;
  /// Throws std::out_of_range when absent.
  double at(std::string_view name) const;
  bool has_flag(std::string_view flag) const;
};

/// Vowel-group heuristic with a silent final e; at least 1.
int count_syllables(std::string_view word);

NamedFeatures surface_features(const TokenizedItem& t);
NamedFeatures readability_features(const TokenizedItem& t);
NamedFeatures richness_features(const TokenizedItem& t);
NamedFeatures info_features(const TokenizedItem& t);
NamedFeatures norm_features(const TokenizedItem& t, const std::vector<ValueLexicon>& lexicons,
                            FeatureGroup group = FeatureGroup::norms);
NamedFeatures emotion_sentiment_features(const TokenizedItem& t, const std::vector<ValueLexicon>& emotions,
                                         const CategoryLexicon* sentiment);
NamedFeatures domain_lexicon_features(const TokenizedItem& t, const std::vector<CategoryLexicon>& lexicons);
NamedFeatures tag_features(const TokenizedItem& t, const ValueLexicon* synsets, const PhraseList* hedges);

/// Category inventory expected from the domain lexicons.
const std::vector<std::string>& domain_inventory();

inline constexpr std::string_view kUposTags[] = {
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
};

struct FeatureResources {
  std::vector<ValueLexicon> norms;
  std::vector<ValueLexicon> emotions;
  std::optional<CategoryLexicon> sentiment;
  std::vector<CategoryLexicon> domain;
  std::optional<ValueLexicon> synsets;
  std::optional<PhraseList> hedges;
};

NamedFeatures extract_item_features(const TokenizedItem& t, const FeatureResources& res);

/// Lowercased lemma if present, else lowercased surface form.
std::string lookup_key(const Token& tok);

}  // namespace annolens::lexfeat
