#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace annolens::lexfeat {

struct ValueEntry {
  double value = 0.0;
  std::optional<double> sd;
};

/// term -> rating on a declared scale. Terms are stored lowercased.
struct ValueLexicon {
  std::string name;
  double scale_min = 0.0;
  double scale_max = 0.0;
  std::map<std::string, ValueEntry, std::less<>> entries;
  bool has_sd = false;

  const ValueEntry* find(std::string_view key) const;
  double midpoint() const { return 0.5 * (scale_min + scale_max); }
  double lower_third() const { return scale_min + (scale_max - scale_min) / 3.0; }
  double upper_third() const { return scale_min + 2.0 * (scale_max - scale_min) / 3.0; }
};

/// term -> category labels. Terms may span several words.
struct CategoryLexicon {
  std::string name;
  std::map<std::string, std::set<std::string>, std::less<>> entries;
  std::size_t max_words = 1;

  std::set<std::string> categories() const;
};

/// Multi-word phrases matched greedily, longest first.
struct PhraseList {
  std::set<std::vector<std::string>> phrases;
  std::size_t max_words = 0;
};

/// First non-comment line must declare `scale_min=<x>` and `scale_max=<y>`,
/// then `term<TAB>value[<TAB>sd]` rows.
ValueLexicon parse_value_lexicon(std::string_view text, std::string name, std::string_view source);
ValueLexicon load_value_lexicon(const std::string& path, std::string name);

/// Same row format without bounds. Used for synset sizes.
ValueLexicon load_unbounded_value_lexicon(const std::string& path, std::string name);

CategoryLexicon parse_category_lexicon(std::string_view text, std::string name, std::string_view source);
CategoryLexicon load_category_lexicon(const std::string& path, std::string name);

PhraseList parse_phrase_list(std::string_view text);
PhraseList load_phrase_list(const std::string& path);

/// Lowercased words of a phrase, split on whitespace.
std::vector<std::string> phrase_words(std::string_view phrase);

/// LZSS with a 4096-byte window, matches of 3..18 bytes and one flag byte
/// per 8 symbols. Returns the compressed byte count.
std::size_t lzss_compressed_size(std::string_view data);
inline constexpr std::string_view kCompressorVersion = "lzss-w4096-m3-18-v1";

}  // namespace annolens::lexfeat
