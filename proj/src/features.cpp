#include "annolens/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "annolens/error.hpp"
#include "annolens/util.hpp"

namespace annolens::lexfeat {

namespace {

constexpr std::pair<FeatureGroup, std::string_view> kGroupNames[] = {
    {FeatureGroup::surface, "surface"},         {FeatureGroup::lemma, "lemma"},
    {FeatureGroup::readability, "readability"}, {FeatureGroup::richness, "richness"},
    {FeatureGroup::information, "information"}, {FeatureGroup::norms, "norms"},
    {FeatureGroup::emotion, "emotion"},         {FeatureGroup::sentiment, "sentiment"},
    {FeatureGroup::domain, "domain"},           {FeatureGroup::pos, "pos"},
    {FeatureGroup::morphology, "morphology"},   {FeatureGroup::dependency, "dependency"},
    {FeatureGroup::chunks, "chunks"},           {FeatureGroup::entity, "entity"},
    {FeatureGroup::semantic, "semantic"},       {FeatureGroup::semantic_pos, "semantic_pos"},
    {FeatureGroup::hedges, "hedges"},
};

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y'; }

bool is_space_byte(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::vector<std::string> lower_words(const TokenizedItem& t) {
  std::vector<std::string> out;
  for (const auto* tok : word_tokens(t)) out.push_back(to_lower_ascii(tok->text));
  return out;
}

std::vector<std::string> lookup_keys(const TokenizedItem& t) {
  std::vector<std::string> out;
  for (const auto* tok : word_tokens(t)) out.push_back(lookup_key(*tok));
  return out;
}

double ttr_of(const std::vector<std::string>& w, std::size_t begin, std::size_t end) {
  std::unordered_set<std::string_view> types;
  for (auto i = begin; i < end; ++i) types.insert(w[i]);
  return static_cast<double>(types.size()) / static_cast<double>(end - begin);
}

double mtld_pass(const std::vector<std::string>& w, bool reverse, double threshold) {
  const auto n = w.size();
  double factors = 0.0;
  std::unordered_set<std::string_view> types;
  std::size_t count = 0;
  double ttr = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& word = w[reverse ? n - 1 - k : k];
    ++count;
    types.insert(word);
    ttr = static_cast<double>(types.size()) / static_cast<double>(count);
    if (ttr <= threshold) {
      factors += 1.0;
      types.clear();
      count = 0;
      ttr = 1.0;
    }
  }
  if (count > 0) factors += (1.0 - ttr) / (1.0 - threshold);
  return factors > 0.0 ? static_cast<double>(n) / factors : static_cast<double>(n);
}

// Synset-size, norm and emotion lookups share one matcher over word tokens.
struct ValueMatch {
  std::size_t matched = 0;
  std::size_t high = 0, low = 0, high_sd = 0;
  double sum = 0.0, sd_sum = 0.0;
  std::size_t sd_count = 0;
};

ValueMatch match_values(const std::vector<std::string>& keys, const ValueLexicon& lex) {
  ValueMatch m;
  const auto sd_cut = (lex.scale_max - lex.scale_min) / 3.0;
  for (const auto& k : keys) {
    const auto* e = lex.find(k);
    if (!e) continue;
    ++m.matched;
    m.sum += e->value;
    if (e->value > lex.upper_third()) ++m.high;
    if (e->value < lex.lower_third()) ++m.low;
    if (e->sd) {
      m.sd_sum += *e->sd;
      ++m.sd_count;
      if (*e->sd > sd_cut) ++m.high_sd;
    }
  }
  return m;
}

void emit_value_lexicon(NamedFeatures& f, FeatureGroup g, const std::vector<std::string>& keys,
                        const ValueLexicon& lex) {
  const auto m = match_values(keys, lex);
  double avg = lex.midpoint();
  if (m.matched > 0) {
    avg = m.sum / static_cast<double>(m.matched);
  } else {
    f.flags.push_back(fmt::format("no_match:{}", lex.name));
  }
  f.add(g, "avg_" + lex.name, avg);
  f.add(g, "n_high_" + lex.name, static_cast<double>(m.high), true);
  f.add(g, "n_low_" + lex.name, static_cast<double>(m.low), true);
  if (lex.has_sd) {
    f.add(g, "avg_std_" + lex.name, m.sd_count ? m.sd_sum / static_cast<double>(m.sd_count) : 0.0);
    f.add(g, "n_high_std_" + lex.name, static_cast<double>(m.high_sd), true);
  }
}

std::string column_safe(std::string_view s) {
  auto out = to_lower_ascii(s);
  std::replace(out.begin(), out.end(), ':', '_');
  return out;
}

struct TreeStats {
  int depth = 0;
  int width = 0;
  std::optional<double> branching;
  std::optional<double> ramification;
};

TreeStats tree_stats(const std::vector<Token>& sent, const std::string& item_id) {
  const auto n = sent.size();
  std::vector<int> depth(n, 0);
  std::vector<int> children(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (sent[i].head > 0) ++children[static_cast<std::size_t>(sent[i].head - 1)];
  }
  for (std::size_t i = 0; i < n; ++i) {
    // walk to the root, bounded by n steps
    int d = 1;
    auto cur = sent[i].head;
    while (cur > 0) {
      if (++d > static_cast<int>(n)) {
        throw DataError(fmt::format("item '{}': dependency cycle", item_id));
      }
      cur = sent[static_cast<std::size_t>(cur - 1)].head;
    }
    depth[i] = d;
  }
  TreeStats s;
  if (n == 0) return s;
  s.depth = *std::max_element(depth.begin(), depth.end());
  std::vector<int> per_level(static_cast<std::size_t>(s.depth) + 1, 0);
  for (auto d : depth) ++per_level[static_cast<std::size_t>(d)];
  s.width = *std::max_element(per_level.begin(), per_level.end());

  int internal = 0, child_total = 0;
  for (auto c : children) {
    if (c > 0) {
      ++internal;
      child_total += c;
    }
  }
  if (internal > 0) s.branching = static_cast<double>(child_total) / internal;
  if (s.depth > 1) {
    double r = 0.0;
    for (int d = 1; d < s.depth; ++d) {
      r += static_cast<double>(per_level[static_cast<std::size_t>(d + 1)]) / per_level[static_cast<std::size_t>(d)];
    }
    s.ramification = r / (s.depth - 1);
  }
  return s;
}

bool nominal_tag(std::string_view upos) { return upos == "NOUN" || upos == "PROPN" || upos == "PRON"; }

bool chunk_internal_rel(std::string_view deprel) {
  const auto base = deprel.substr(0, deprel.find(':'));
  return base == "compound" || base == "flat" || base == "fixed" || base == "goeswith";
}

double mean_or_zero(double sum, std::size_t n) { return n ? sum / static_cast<double>(n) : 0.0; }

}  // namespace

std::string_view to_string(FeatureGroup g) {
  for (const auto& [k, v] : kGroupNames) {
    if (k == g) return v;
  }
  return "unknown";
}

FeatureGroup feature_group_from_string(std::string_view s) {
  for (const auto& [k, v] : kGroupNames) {
    if (v == s) return k;
  }
  throw DataError(fmt::format("unknown feature group '{}'", s));
}

void NamedFeatures::add(FeatureGroup g, std::string name, double value, bool is_count) {
  groups.insert(g);
  values.push_back(Feature{std::move(name), value, is_count, g});
}

void NamedFeatures::merge(NamedFeatures&& other) {
  for (auto& v : other.values) values.push_back(std::move(v));
  groups.insert(other.groups.begin(), other.groups.end());
  for (auto& f : other.flags) flags.push_back(std::move(f));
}

std::optional<double> NamedFeatures::get(std::string_view name) const {
  for (const auto& v : values) {
    if (v.name == name) return v.value;
  }
  return std::nullopt;
}

double NamedFeatures::at(std::string_view name) const {
  const auto v = get(name);
  if (!v) throw std::out_of_range(fmt::format("feature '{}' not present", name));
  return *v;
}

bool NamedFeatures::has_flag(std::string_view flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

std::string lookup_key(const Token& tok) { return to_lower_ascii(tok.lemma.empty() ? tok.text : tok.lemma); }

int count_syllables(std::string_view word) {
  std::string w;
  for (char c : word) {
    const auto l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (l >= 'a' && l <= 'z') w.push_back(l);
  }
  int groups = 0;
  bool prev = false;
  for (char c : w) {
    const bool v = is_vowel(c);
    if (v && !prev) ++groups;
    prev = v;
  }
  const auto n = w.size();
  if (groups > 1 && n > 2 && w[n - 1] == 'e' && !is_vowel(w[n - 2])) {
    const bool consonant_le = w[n - 2] == 'l' && !is_vowel(w[n - 3]);
    if (!consonant_le) --groups;
  }
  return std::max(groups, 1);
}

NamedFeatures surface_features(const TokenizedItem& t) {
  NamedFeatures f;
  constexpr auto g = FeatureGroup::surface;
  const auto words = word_tokens(t);
  const auto n = static_cast<double>(words.size());
  const auto s = static_cast<double>(t.sentences.size());

  std::size_t non_space = 0;
  for (std::size_t i = 0; i < t.text.size(); ++i) {
    const auto c = static_cast<unsigned char>(t.text[i]);
    if ((c & 0xC0) == 0x80 || is_space_byte(t.text[i])) continue;
    ++non_space;
  }
  std::unordered_set<std::string> types;
  std::size_t long_words = 0, word_chars = 0;
  for (const auto* w : words) {
    types.insert(to_lower_ascii(w->text));
    const auto len = utf8_length(w->text);
    word_chars += len;
    if (len > 6) ++long_words;
  }

  f.add(g, "raw_sequence_length", static_cast<double>(utf8_length(t.text)));
  f.add(g, "n_characters", static_cast<double>(non_space));
  f.add(g, "n_tokens", n);
  f.add(g, "n_sentences", s);
  f.add(g, "n_types", static_cast<double>(types.size()));
  f.add(g, "n_long_words", static_cast<double>(long_words), true);
  f.add(g, "tokens_per_sentence", s > 0 ? n / s : 0.0);
  f.add(g, "characters_per_sentence", s > 0 ? static_cast<double>(non_space) / s : 0.0);
  f.add(g, "avg_word_length", n > 0 ? static_cast<double>(word_chars) / n : 0.0);
  if (words.empty()) f.flags.push_back("no_word_tokens");

  if (t.layers.lemma) {
    std::unordered_set<std::string> lemmas;
    for (const auto* w : words) lemmas.insert(to_lower_ascii(w->lemma));
    f.add(FeatureGroup::lemma, "n_lemmas", static_cast<double>(lemmas.size()));
  }
  return f;
}

NamedFeatures readability_features(const TokenizedItem& t) {
  NamedFeatures f;
  constexpr auto g = FeatureGroup::readability;
  const auto words = word_tokens(t);
  const auto W = static_cast<double>(words.size());
  const auto S = static_cast<double>(t.sentences.size());

  double syl = 0.0, mono = 0.0, poly = 0.0, chars = 0.0, long_words = 0.0;
  for (const auto* w : words) {
    const int k = count_syllables(w->text);
    syl += k;
    mono += k == 1;
    poly += k > 2;
    const auto len = static_cast<double>(utf8_length(w->text));
    chars += len;
    long_words += len > 6;
  }

  double fre = 0, fkgl = 0, fog = 0, ari = 0, smog = 0, cli = 0, lix = 0, rix = 0;
  if (W > 0 && S > 0) {
    fre = 206.835 - 1.015 * (W / S) - 84.6 * (syl / W);
    fkgl = 0.39 * (W / S) + 11.8 * (syl / W) - 15.59;
    fog = 0.4 * (W / S + 100.0 * poly / W);
    ari = 4.71 * (chars / W) + 0.5 * (W / S) - 21.43;
    smog = 1.0430 * std::sqrt(poly * 30.0 / S) + 3.1291;
    cli = 0.0588 * (100.0 * chars / W) - 0.296 * (100.0 * S / W) - 15.8;
    lix = W / S + 100.0 * long_words / W;
    rix = long_words / S;
  } else {
    f.flags.push_back("readability_no_words");
  }
  f.add(g, "flesch_reading_ease", fre);
  f.add(g, "flesch_kincaid_grade", fkgl);
  f.add(g, "gunning_fog", fog);
  f.add(g, "ari", ari);
  f.add(g, "smog", smog);
  f.add(g, "cli", cli);
  f.add(g, "lix", lix);
  f.add(g, "rix", rix);
  f.add(g, "n_syllables", syl, true);
  f.add(g, "n_monosyllables", mono, true);
  f.add(g, "n_polysyllables", poly, true);
  return f;
}

NamedFeatures richness_features(const TokenizedItem& t) {
  NamedFeatures f;
  constexpr auto g = FeatureGroup::richness;
  const auto w = lower_words(t);
  const auto N = static_cast<double>(w.size());

  std::map<std::string, std::size_t> freq;
  for (const auto& x : w) ++freq[x];
  const auto V = static_cast<double>(freq.size());
  std::map<std::size_t, std::size_t> spectrum;  // i -> V_i
  for (const auto& [word, c] : freq) ++spectrum[c];
  auto Vi = [&](std::size_t i) {
    const auto it = spectrum.find(i);
    return it == spectrum.end() ? 0.0 : static_cast<double>(it->second);
  };

  if (w.empty()) {
    f.flags.push_back("richness_no_words");
    for (auto name : {"ttr", "rttr", "cttr", "herdan_c", "summer_index", "dugast_u", "maas_index", "yule_k",
                      "herdan_v", "simpsons_d", "sichel_s", "msttr", "mattr", "mtld", "hdd"}) {
      f.add(g, name, 0.0);
    }
    f.add(g, "n_hapax_legomena", 0.0, true);
    f.add(g, "n_hapax_dislegomena", 0.0, true);
    return f;
  }

  bool degenerate = false;
  auto guarded = [&](double v) {
    if (std::isfinite(v)) return v;
    degenerate = true;
    return 0.0;
  };
  const double logN = std::log(N), logV = std::log(V);

  f.add(g, "ttr", V / N);
  f.add(g, "rttr", V / std::sqrt(N));
  f.add(g, "cttr", V / std::sqrt(2.0 * N));
  f.add(g, "herdan_c", guarded(logN > 0 ? logV / logN : NAN));
  f.add(g, "summer_index", guarded(V > 1 && N > 1 ? std::log(logV) / std::log(logN) : NAN));
  f.add(g, "dugast_u", guarded(logN > logV ? logN * logN / (logN - logV) : NAN));
  f.add(g, "maas_index", guarded(logN > 0 ? (logN - logV) / (logN * logN) : NAN));

  double sum_i2 = 0.0, sum_p2 = 0.0, simpson = 0.0;
  for (const auto& [i, vi] : spectrum) {
    const auto di = static_cast<double>(i), dv = static_cast<double>(vi);
    sum_i2 += di * di * dv;
    sum_p2 += dv * (di / N) * (di / N);
    simpson += dv * di * (di - 1.0);
  }
  f.add(g, "yule_k", 1e4 * (sum_i2 - N) / (N * N));
  f.add(g, "herdan_v", std::sqrt(std::max(0.0, sum_p2 - 1.0 / V)));
  f.add(g, "simpsons_d", guarded(N > 1 ? simpson / (N * (N - 1.0)) : NAN));
  f.add(g, "sichel_s", Vi(2) / V);

  constexpr std::size_t kSegment = 25;
  const auto n = w.size();
  double msttr = 0.0, mattr = 0.0;
  if (n < kSegment) {
    msttr = mattr = V / N;
  } else {
    const auto segments = n / kSegment;
    for (std::size_t s = 0; s < segments; ++s) msttr += ttr_of(w, s * kSegment, (s + 1) * kSegment);
    msttr /= static_cast<double>(segments);

    std::unordered_map<std::string_view, int> window;
    for (std::size_t i = 0; i < kSegment; ++i) ++window[w[i]];
    double acc = static_cast<double>(window.size());
    for (std::size_t i = kSegment; i < n; ++i) {
      if (--window[w[i - kSegment]] == 0) window.erase(w[i - kSegment]);
      ++window[w[i]];
      acc += static_cast<double>(window.size());
    }
    mattr = acc / static_cast<double>(n - kSegment + 1) / static_cast<double>(kSegment);
  }
  f.add(g, "msttr", msttr);
  f.add(g, "mattr", mattr);

  constexpr double kMtldThreshold = 0.72;
  f.add(g, "mtld", 0.5 * (mtld_pass(w, false, kMtldThreshold) + mtld_pass(w, true, kMtldThreshold)));

  const auto draws = std::min<std::size_t>(42, n);
  double hdd = 0.0;
  for (const auto& [word, c] : freq) {
    double p0 = 0.0;
    if (n - c >= draws) {
      p0 = 1.0;
      for (std::size_t k = 0; k < draws; ++k) {
        p0 *= static_cast<double>(n - c - k) / static_cast<double>(n - k);
      }
    }
    hdd += (1.0 - p0) / static_cast<double>(draws);
  }
  f.add(g, "hdd", hdd);
  f.add(g, "n_hapax_legomena", Vi(1), true);
  f.add(g, "n_hapax_dislegomena", Vi(2), true);

  if (degenerate) f.flags.push_back("richness_degenerate");
  return f;
}

NamedFeatures info_features(const TokenizedItem& t) {
  NamedFeatures f;
  constexpr auto g = FeatureGroup::information;
  const auto w = lower_words(t);
  std::map<std::string, std::size_t> freq;
  for (const auto& x : w) ++freq[x];
  double h = 0.0;
  for (const auto& [word, c] : freq) {
    const double p = static_cast<double>(c) / static_cast<double>(w.size());
    h -= p * std::log2(p);
  }
  f.add(g, "entropy", h == 0.0 ? 0.0 : h);
  double ratio = 0.0;
  if (!t.text.empty()) {
    ratio = static_cast<double>(lzss_compressed_size(t.text)) / static_cast<double>(t.text.size());
  } else {
    f.flags.push_back("empty_text");
  }
  f.add(g, "compressibility", ratio);
  return f;
}

NamedFeatures norm_features(const TokenizedItem& t, const std::vector<ValueLexicon>& lexicons, FeatureGroup group) {
  NamedFeatures f;
  const auto keys = lookup_keys(t);
  for (const auto& lex : lexicons) {
    if (!(lex.scale_max > lex.scale_min)) {
      throw ConfigError(fmt::format("lexicon '{}' has no scale bounds", lex.name));
    }
    emit_value_lexicon(f, group, keys, lex);
  }
  return f;
}

NamedFeatures emotion_sentiment_features(const TokenizedItem& t, const std::vector<ValueLexicon>& emotions,
                                         const CategoryLexicon* sentiment) {
  auto f = norm_features(t, emotions, FeatureGroup::emotion);
  if (!sentiment) return f;
  constexpr auto g = FeatureGroup::sentiment;
  const auto keys = lookup_keys(t);
  double pos = 0.0, neg = 0.0;
  for (const auto& k : keys) {
    const auto it = sentiment->entries.find(k);
    if (it == sentiment->entries.end()) continue;
    pos += it->second.count("positive");
    neg += it->second.count("negative");
  }
  f.add(g, "n_positive_sentiment", pos, true);
  f.add(g, "n_negative_sentiment", neg, true);
  if (keys.empty()) f.flags.push_back("sentiment_no_words");
  f.add(g, "sentiment_score", keys.empty() ? 0.0 : (pos - neg) / static_cast<double>(keys.size()));
  return f;
}

const std::vector<std::string>& domain_inventory() {
  static const std::vector<std::string> inv = {
      "hatebase", "abusive", "ps",  "rci", "pa",  "ddf", "ddp",     "dmc",    "is",         "or",
      "an",       "asm",     "asf", "pr",  "om",  "qas", "cds",     "re",     "svp",        "generic",
      "sexual",   "appearance", "racial", "intelligence", "politics",
  };
  return inv;
}

NamedFeatures domain_lexicon_features(const TokenizedItem& t, const std::vector<CategoryLexicon>& lexicons) {
  NamedFeatures f;
  if (lexicons.empty()) return f;
  constexpr auto g = FeatureGroup::domain;
  const auto keys = lookup_keys(t);

  std::map<std::string, double> counts;
  for (const auto& lex : lexicons) {
    for (const auto& c : lex.categories()) counts[c] = 0.0;
  }
  double hateful = 0.0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    std::set<std::string> hit;
    for (const auto& lex : lexicons) {
      // longest phrase starting at i
      std::string phrase;
      const std::set<std::string>* best = nullptr;
      for (std::size_t len = 1; len <= lex.max_words && i + len <= keys.size(); ++len) {
        if (len > 1) phrase.push_back(' ');
        phrase += keys[i + len - 1];
        const auto it = lex.entries.find(phrase);
        if (it != lex.entries.end()) best = &it->second;
      }
      if (best) hit.insert(best->begin(), best->end());
    }
    for (const auto& c : hit) counts[c] += 1.0;
    hateful += !hit.empty();
  }
  for (const auto& [c, v] : counts) f.add(g, "n_" + c, v, true);
  f.add(g, "n_hateful", hateful, true);
  return f;
}

NamedFeatures tag_features(const TokenizedItem& t, const ValueLexicon* synsets, const PhraseList* hedges) {
  NamedFeatures f;
  std::vector<const Token*> all;
  for (const auto& s : t.sentences) {
    for (const auto& tok : s) all.push_back(&tok);
  }
  const auto words = word_tokens(t);

  if (t.layers.pos) {
    constexpr auto g = FeatureGroup::pos;
    std::map<std::string, double> counts;
    for (auto tag : kUposTags) counts[std::string(tag)] = 0.0;
    std::set<std::string> distinct;
    double lexical = 0.0;
    for (const auto* tok : all) {
      counts[tok->upos] += 1.0;
      distinct.insert(tok->upos);
      if (!tok->is_punct && (tok->upos == "NOUN" || tok->upos == "VERB" || tok->upos == "ADJ" || tok->upos == "ADV")) {
        lexical += 1.0;
      }
    }
    for (const auto& [tag, c] : counts) f.add(g, "n_" + to_lower_ascii(tag), c, true);
    f.add(g, "n_lexical_tokens", lexical, true);
    f.add(g, "pos_variability", all.empty() ? 0.0 : static_cast<double>(distinct.size()) / all.size());
    f.add(g, "lexical_density", words.empty() ? 0.0 : lexical / static_cast<double>(words.size()));
  }

  if (t.layers.morph) {
    std::map<std::string, double> counts;
    for (const auto* tok : all) {
      for (const auto& [attr, val] : tok->feats) counts[fmt::format("n_{}_{}_{}", tok->upos, attr, val)] += 1.0;
    }
    f.groups.insert(FeatureGroup::morphology);
    for (const auto& [name, c] : counts) f.add(FeatureGroup::morphology, name, c, true);
  }

  if (t.layers.dependency) {
    constexpr auto g = FeatureGroup::dependency;
    std::map<std::string, double> rels;
    for (const auto* tok : all) rels["n_dependency_" + column_safe(tok->deprel)] += 1.0;
    f.groups.insert(g);
    for (const auto& [name, c] : rels) f.add(g, name, c, true);

    int depth = 0, width = 0;
    double branch_sum = 0.0, ram_sum = 0.0;
    std::size_t branch_n = 0, ram_n = 0;
    for (const auto& s : t.sentences) {
      const auto st = tree_stats(s, t.item_id);
      depth = std::max(depth, st.depth);
      width = std::max(width, st.width);
      if (st.branching) {
        branch_sum += *st.branching;
        ++branch_n;
      }
      if (st.ramification) {
        ram_sum += *st.ramification;
        ++ram_n;
      }
    }
    f.add(g, "tree_depth", depth);
    f.add(g, "tree_width", width);
    f.add(g, "branching_factor", mean_or_zero(branch_sum, branch_n));
    f.add(g, "ramification_factor", mean_or_zero(ram_sum, ram_n));

    if (t.layers.pos) {
      double chunks = 0.0;
      for (const auto* tok : all) chunks += nominal_tag(tok->upos) && !chunk_internal_rel(tok->deprel);
      f.add(FeatureGroup::chunks, "n_noun_chunks", chunks, true);
    }
  }

  if (t.layers.entity) {
    constexpr auto g = FeatureGroup::entity;
    std::map<std::string, double> types;
    double total = 0.0;
    for (const auto& s : t.sentences) {
      std::string prev;
      for (const auto& tok : s) {
        const auto& tag = tok.entity;
        if (tag.empty() || tag == "O") {
          prev.clear();
          continue;
        }
        std::string type = tag;
        char prefix = 0;
        if (tag.size() > 2 && tag[1] == '-') {
          prefix = tag[0];
          type = tag.substr(2);
        }
        type = to_lower_ascii(type);
        const bool starts = prefix == 'B' || prefix == 'S' || type != prev;
        if (starts) {
          total += 1.0;
          types[type] += 1.0;
        }
        prev = type;
      }
    }
    f.groups.insert(g);
    f.add(g, "n_entities", total, true);
    for (const auto& [type, c] : types) f.add(g, "n_" + type, c, true);
  }

  if (synsets) {
    auto emit = [&](FeatureGroup g, std::string_view suffix, auto&& keep) {
      double sum = 0.0, high = 0.0, low = 0.0;
      std::size_t matched = 0;
      for (const auto* w : words) {
        if (!keep(*w)) continue;
        const auto* e = synsets->find(lookup_key(*w));
        if (!e) continue;
        ++matched;
        sum += e->value;
        high += e->value > 4.0;
        low += e->value < 3.0;
      }
      if (!matched) f.flags.push_back(fmt::format("no_match:synsets{}", suffix));
      f.add(g, fmt::format("avg_synsets{}", suffix), mean_or_zero(sum, matched));
      f.add(g, fmt::format("n_high_synsets{}", suffix), high, true);
      f.add(g, fmt::format("n_low_synsets{}", suffix), low, true);
    };
    emit(FeatureGroup::semantic, "", [](const Token&) { return true; });
    if (t.layers.pos) {
      for (auto [tag, suffix] : {std::pair{"NOUN", "_noun"}, {"ADJ", "_adj"}, {"VERB", "_verb"}}) {
        emit(FeatureGroup::semantic_pos, suffix, [tag = std::string_view(tag)](const Token& tok) {
          return tok.upos == tag;
        });
      }
    }
  }

  if (hedges) {
    const auto keys = lookup_keys(t);
    std::vector<std::string> surface = lower_words(t);
    double n = 0.0;
    std::size_t i = 0;
    while (i < keys.size()) {
      std::size_t best = 0;
      for (std::size_t len = std::min(hedges->max_words, keys.size() - i); len >= 1 && !best; --len) {
        const std::vector<std::string> by_surface(surface.begin() + i, surface.begin() + i + len);
        const std::vector<std::string> by_key(keys.begin() + i, keys.begin() + i + len);
        if (hedges->phrases.count(by_surface) || hedges->phrases.count(by_key)) best = len;
      }
      if (best) {
        n += 1.0;
        i += best;
      } else {
        ++i;
      }
    }
    f.add(FeatureGroup::hedges, "n_hedges", n, true);
  }
  return f;
}

NamedFeatures extract_item_features(const TokenizedItem& t, const FeatureResources& res) {
  NamedFeatures f;
  f.flags = t.flags;
  f.merge(surface_features(t));
  f.merge(readability_features(t));
  f.merge(richness_features(t));
  f.merge(info_features(t));
  f.merge(norm_features(t, res.norms));
  f.merge(emotion_sentiment_features(t, res.emotions, res.sentiment ? &*res.sentiment : nullptr));
  f.merge(domain_lexicon_features(t, res.domain));
  f.merge(tag_features(t, res.synsets ? &*res.synsets : nullptr, res.hedges ? &*res.hedges : nullptr));
  return f;
}

}  // namespace annolens::lexfeat
