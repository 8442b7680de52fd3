#include "annolens/lexicon.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "annolens/csv.hpp"
#include "annolens/error.hpp"
#include "annolens/util.hpp"

namespace annolens::lexfeat {

namespace {

template <typename F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t start = 0, line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    f(line, line_no);
    start = end + 1;
  }
}

std::vector<std::string_view> tab_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string normalize_term(std::string_view term) {
  std::string out;
  for (const auto& w : phrase_words(term)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

ValueLexicon parse_values(std::string_view text, std::string name, std::string_view source, bool bounded) {
  ValueLexicon lex;
  lex.name = std::move(name);
  bool have_min = false, have_max = false, header_seen = !bounded;
  bool first_row = true;

  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto t = trim(line);
    if (t.empty()) return;
    const auto where = fmt::format("{}:{}", source, line_no);
    if (!header_seen) {
      header_seen = true;
      for (const auto& tok : split_any(t.front() == '#' ? t.substr(1) : t, " \t,;")) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const auto key = tok.substr(0, eq);
        const auto val = std::string_view(tok).substr(eq + 1);
        if (key == "scale_min") {
          lex.scale_min = parse_number(val, where);
          have_min = true;
        } else if (key == "scale_max") {
          lex.scale_max = parse_number(val, where);
          have_max = true;
        }
      }
      if (!have_min || !have_max) {
        throw ConfigError(fmt::format("{}: lexicon '{}' does not declare scale_min and scale_max", where, lex.name));
      }
      if (!(lex.scale_max > lex.scale_min)) {
        throw ConfigError(fmt::format("{}: lexicon '{}' has an empty scale", where, lex.name));
      }
      return;
    }
    if (t.front() == '#') return;
    const auto f = tab_fields(line);
    if (f.size() < 2 || f.size() > 3) {
      throw DataError(fmt::format("{}: expected term<TAB>value[<TAB>sd]", where));
    }
    ValueEntry e;
    try {
      e.value = parse_number(f[1], where);
    } catch (const DataError&) {
      if (first_row) {  // column header row
        first_row = false;
        return;
      }
      throw;
    }
    first_row = false;
    if (f.size() == 3) {
      e.sd = parse_number(f[2], where);
      lex.has_sd = true;
    }
    if (bounded && (e.value < lex.scale_min || e.value > lex.scale_max)) {
      throw DataError(fmt::format("{}: value {} outside [{}, {}]", where, f[1], lex.scale_min, lex.scale_max));
    }
    const auto key = normalize_term(f[0]);
    if (key.empty()) throw DataError(fmt::format("{}: empty term", where));
    if (!lex.entries.emplace(key, e).second) {
      throw DataError(fmt::format("{}: duplicate term '{}'", where, key));
    }
  });
  if (bounded && !header_seen) {
    throw ConfigError(fmt::format("{}: lexicon '{}' does not declare scale_min and scale_max", source, lex.name));
  }
  return lex;
}

}  // namespace

const ValueEntry* ValueLexicon::find(std::string_view key) const {
  const auto it = entries.find(key);
  return it == entries.end() ? nullptr : &it->second;
}

std::set<std::string> CategoryLexicon::categories() const {
  std::set<std::string> out;
  for (const auto& [term, cats] : entries) out.insert(cats.begin(), cats.end());
  return out;
}

std::vector<std::string> phrase_words(std::string_view phrase) {
  std::vector<std::string> out;
  for (const auto& w : split_any(phrase, " \t")) out.push_back(to_lower_ascii(w));
  return out;
}

ValueLexicon parse_value_lexicon(std::string_view text, std::string name, std::string_view source) {
  return parse_values(text, std::move(name), source, true);
}

ValueLexicon load_value_lexicon(const std::string& path, std::string name) {
  return parse_value_lexicon(csv::read_text(path), std::move(name), path);
}

ValueLexicon load_unbounded_value_lexicon(const std::string& path, std::string name) {
  return parse_values(csv::read_text(path), std::move(name), path, false);
}

CategoryLexicon parse_category_lexicon(std::string_view text, std::string name, std::string_view source) {
  CategoryLexicon lex;
  lex.name = std::move(name);
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') return;
    const auto f = tab_fields(line);
    if (f.size() != 2) {
      throw DataError(fmt::format("{}:{}: expected term<TAB>category[,category...]", source, line_no));
    }
    const auto words = phrase_words(f[0]);
    const auto cats = split_any(f[1], ",");
    if (words.empty() || cats.empty()) {
      throw DataError(fmt::format("{}:{}: empty term or category", source, line_no));
    }
    auto& slot = lex.entries[normalize_term(f[0])];
    for (const auto& c : cats) slot.insert(to_lower_ascii(c));
    lex.max_words = std::max(lex.max_words, words.size());
  });
  return lex;
}

CategoryLexicon load_category_lexicon(const std::string& path, std::string name) {
  return parse_category_lexicon(csv::read_text(path), std::move(name), path);
}

PhraseList parse_phrase_list(std::string_view text) {
  PhraseList list;
  for_each_line(text, [&](std::string_view line, std::size_t) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') return;
    auto words = phrase_words(t);
    list.max_words = std::max(list.max_words, words.size());
    list.phrases.insert(std::move(words));
  });
  return list;
}

PhraseList load_phrase_list(const std::string& path) { return parse_phrase_list(csv::read_text(path)); }

std::size_t lzss_compressed_size(std::string_view data) {
  constexpr std::size_t kWindow = 4096, kMinMatch = 3, kMaxMatch = 18;
  std::size_t out = 0, symbols = 0, pos = 0;
  while (pos < data.size()) {
    if (symbols % 8 == 0) ++out;  // flag byte
    ++symbols;
    std::size_t best_len = 0;
    const auto lookahead = std::min(kMaxMatch, data.size() - pos);
    const auto window_start = pos > kWindow ? pos - kWindow : 0;
    for (auto cand = pos; cand-- > window_start;) {  // nearest first; ties keep the nearest
      std::size_t len = 0;
      while (len < lookahead && data[cand + len] == data[pos + len]) ++len;
      if (len > best_len) {
        best_len = len;
        if (len == lookahead) break;
      }
    }
    if (best_len >= kMinMatch) {
      out += 2;
      pos += best_len;
    } else {
      out += 1;
      pos += 1;
    }
  }
  return out;
}

}  // namespace annolens::lexfeat
