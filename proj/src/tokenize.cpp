#include "annolens/tokenize.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include <fmt/format.h>

#include "annolens/csv.hpp"
#include "annolens/error.hpp"
#include "annolens/util.hpp"

namespace annolens::lexfeat {

namespace {

// Multi-byte sequences treated as punctuation rather than word characters.
constexpr std::string_view kUnicodePunct[] = {
    "\u2018", "\u201C", "\u201D", "\u2026", "\u2013", "\u2014", "\u00AB", "\u00BB", "\u00BF", "\u00A1",
};
constexpr std::string_view kRightQuote = "\u2019";

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_ascii_word(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

std::size_t utf8_seq_len(unsigned char c) {
  if (c < 0x80) return 1;
  if ((c >> 5) == 0x6) return 2;
  if ((c >> 4) == 0xE) return 3;
  if ((c >> 3) == 0x1E) return 4;
  return 1;
}

// Length of the code point at `pos` if it is a word character, else 0.
std::size_t word_char_at(std::string_view s, std::size_t pos) {
  const auto c = static_cast<unsigned char>(s[pos]);
  if (c < 0x80) return is_ascii_word(c) ? 1 : 0;
  const auto len = std::min(utf8_seq_len(c), s.size() - pos);
  const auto seq = s.substr(pos, len);
  if (seq == kRightQuote) return 0;
  for (auto p : kUnicodePunct) {
    if (seq == p) return 0;
  }
  return len;
}

// Length of an apostrophe at `pos` (' or U+2019), else 0.
std::size_t apostrophe_at(std::string_view s, std::size_t pos) {
  if (s[pos] == '\'') return 1;
  if (s.substr(pos, kRightQuote.size()) == kRightQuote) return kRightQuote.size();
  return 0;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_terminal_char(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_terminal(std::string_view tok) {
  return tok.find_first_of(".!?") != std::string_view::npos || tok.find("\u2026") != std::string_view::npos;
}

bool starts_url(std::string_view s) {
  auto lower = to_lower_ascii(s.substr(0, 8));
  return lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.");
}

bool all_punct(std::string_view s) {
  for (std::size_t i = 0; i < s.size();) {
    if (word_char_at(s, i)) return false;
    i += utf8_seq_len(static_cast<unsigned char>(s[i]));
  }
  return !s.empty();
}

}  // namespace

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

TokenizedItem tokenize(std::string_view text, std::string item_id) {
  TokenizedItem item;
  item.item_id = std::move(item_id);
  item.text = std::string(text);
  std::vector<Token> sentence;

  auto close_sentence = [&]() {
    if (!sentence.empty()) item.sentences.push_back(std::move(sentence));
    sentence.clear();
  };
  auto emit = [&](std::size_t b, std::size_t e, bool punct) {
    Token t;
    t.text = std::string(text.substr(b, e - b));
    t.begin = b;
    t.end = e;
    t.is_punct = punct;
    const bool terminal = punct && is_terminal(t.text);
    sentence.push_back(std::move(t));
    if (terminal) close_sentence();
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      if (c == '\n') close_sentence();
      ++i;
      continue;
    }
    if (starts_url(text.substr(i))) {
      std::size_t e = i;
      while (e < text.size() && !is_space(static_cast<unsigned char>(text[e]))) ++e;
      emit(i, e, false);
      i = e;
      continue;
    }
    if (const auto w = word_char_at(text, i)) {
      std::size_t e = i + w;
      while (e < text.size()) {
        if (const auto w2 = word_char_at(text, e)) {
          e += w2;
          continue;
        }
        // joiners kept inside a word when followed by a word character
        std::size_t joiner = apostrophe_at(text, e);
        if (!joiner && text[e] == '-') joiner = 1;
        if (!joiner && (text[e] == '.' || text[e] == ',') && is_digit(text[e - 1]) && e + 1 < text.size() &&
            is_digit(text[e + 1])) {
          joiner = 1;
        }
        if (joiner && e + joiner < text.size() && word_char_at(text, e + joiner)) {
          e += joiner;
          continue;
        }
        break;
      }
      emit(i, e, false);
      i = e;
      continue;
    }
    // punctuation: runs of the same character, or of mixed .!?, form one token
    const auto len = std::min(utf8_seq_len(c), text.size() - i);
    const auto unit = text.substr(i, len);
    std::size_t e = i + len;
    if (is_terminal_char(text[i])) {
      while (e < text.size() && is_terminal_char(text[e])) ++e;
    } else {
      while (e + len <= text.size() && text.substr(e, len) == unit) e += len;
    }
    emit(i, e, true);
    i = e;
  }
  close_sentence();
  return item;
}

std::vector<const Token*> word_tokens(const TokenizedItem& item) {
  std::vector<const Token*> out;
  for (const auto& s : item.sentences) {
    for (const auto& t : s) {
      if (!t.is_punct) out.push_back(&t);
    }
  }
  return out;
}

namespace {

struct ConlluSentence {
  std::vector<Token> tokens;
  std::vector<bool> space_after;
  std::string text_comment;
  bool has_text_comment = false;
};

struct ConlluItem {
  std::string id;
  std::vector<ConlluSentence> sentences;
};

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    cols.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cols;
}

bool parse_int(std::string_view s, int& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return !s.empty() && ec == std::errc() && ptr == end;
}

std::string entity_from_misc(std::string_view misc, bool& has_key) {
  if (misc == "_") return {};
  for (const auto& part : split_any(misc, "|")) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) continue;
    const auto key = part.substr(0, eq);
    if (key == "NER" || key == "NE" || key == "Entity") {
      has_key = true;
      return part.substr(eq + 1);
    }
  }
  return {};
}

TokenizedItem finish_item(ConlluItem&& raw, bool file_has_entities) {
  TokenizedItem item;
  item.item_id = std::move(raw.id);

  // Reconstruct text from forms, honouring SpaceAfter=No.
  std::string rebuilt;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> offsets;
  std::string commented;
  bool all_comments = !raw.sentences.empty();
  for (auto& s : raw.sentences) {
    if (!rebuilt.empty()) rebuilt.push_back(' ');
    offsets.emplace_back();
    for (std::size_t k = 0; k < s.tokens.size(); ++k) {
      const auto b = rebuilt.size();
      rebuilt += s.tokens[k].text;
      offsets.back().emplace_back(b, rebuilt.size());
      if (s.space_after[k] && k + 1 < s.tokens.size()) rebuilt.push_back(' ');
    }
    all_comments = all_comments && s.has_text_comment;
    if (s.has_text_comment) {
      if (!commented.empty()) commented.push_back(' ');
      commented += s.text_comment;
    }
  }

  // Prefer the original text when every form can be located in it.
  bool use_comment = all_comments;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> comment_offsets;
  if (use_comment) {
    std::size_t pos = 0;
    for (const auto& s : raw.sentences) {
      comment_offsets.emplace_back();
      for (const auto& t : s.tokens) {
        const auto found = commented.find(t.text, pos);
        if (found == std::string::npos) {
          use_comment = false;
          break;
        }
        comment_offsets.back().emplace_back(found, found + t.text.size());
        pos = found + t.text.size();
      }
      if (!use_comment) break;
    }
  }
  item.text = use_comment ? commented : rebuilt;
  const auto& offs = use_comment ? comment_offsets : offsets;

  std::size_t n_tokens = 0, n_lemma = 0, n_pos = 0, n_morph = 0, n_head = 0;
  for (std::size_t si = 0; si < raw.sentences.size(); ++si) {
    auto& s = raw.sentences[si];
    for (std::size_t k = 0; k < s.tokens.size(); ++k) {
      auto& t = s.tokens[k];
      t.begin = offs[si][k].first;
      t.end = offs[si][k].second;
      ++n_tokens;
      n_lemma += !t.lemma.empty();
      n_pos += !t.upos.empty();
      n_morph += !t.upos.empty();  // FEATS "_" is a valid empty feature set
      n_head += t.head >= 0;
      t.is_punct = t.upos.empty() ? all_punct(t.text) : (t.upos == "PUNCT");
      if (file_has_entities && t.entity.empty()) t.entity = "O";
    }
    item.sentences.push_back(std::move(s.tokens));
  }

  auto layer = [&](std::size_t have, const char* name) {
    if (have == n_tokens && n_tokens > 0) return true;
    if (have > 0) item.flags.push_back(fmt::format("partial_layer:{}", name));
    return false;
  };
  item.layers.lemma = layer(n_lemma, "lemma");
  item.layers.pos = layer(n_pos, "pos");
  item.layers.morph = item.layers.pos && n_morph == n_tokens;
  item.layers.dependency = layer(n_head, "dependency");
  item.layers.entity = file_has_entities && n_tokens > 0;
  return item;
}

}  // namespace

std::vector<TokenizedItem> parse_conllu(std::string_view text, std::string_view source) {
  std::vector<ConlluItem> items;
  ConlluSentence current;
  bool in_sentence = false;
  bool file_has_entities = false;
  std::size_t line_no = 0;

  auto fail = [&](std::string_view what) {
    throw DataError(fmt::format("{}:{}: {}", source, line_no, what));
  };
  auto flush = [&]() {
    if (in_sentence && !current.tokens.empty()) {
      if (items.empty()) fail("sentence before any '# item_id =' comment");
      items.back().sentences.push_back(std::move(current));
    }
    current = ConlluSentence{};
    in_sentence = false;
  };

  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    start = end + 1;

    if (trim(line).empty()) {
      flush();
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string_view::npos) {
        const auto key = trim(body.substr(0, eq));
        const auto value = trim(body.substr(eq + 1));
        if (key == "item_id") {
          flush();
          if (value.empty()) fail("empty item_id");
          items.push_back(ConlluItem{std::string(value), {}});
        } else if (key == "text") {
          current.text_comment = std::string(value);
          current.has_text_comment = true;
        }
      }
      if (end == text.size()) break;
      continue;
    }

    const auto cols = split_tabs(line);
    if (cols.size() != 10) fail(fmt::format("expected 10 tab-separated columns, found {}", cols.size()));
    in_sentence = true;
    if (cols[0].find_first_of("-.") != std::string_view::npos) {
      if (end == text.size()) break;
      continue;  // multiword range or empty node
    }
    int id = 0;
    if (!parse_int(cols[0], id) || id != static_cast<int>(current.tokens.size()) + 1) {
      fail(fmt::format("bad token id '{}'", cols[0]));
    }
    Token t;
    t.text = std::string(cols[1]);
    if (t.text.empty()) fail("empty FORM");
    if (cols[2] != "_" || cols[1] == "_") t.lemma = std::string(cols[2]);
    if (cols[3] != "_") t.upos = std::string(cols[3]);
    if (cols[5] != "_") {
      for (const auto& f : split_any(cols[5], "|")) {
        const auto eq = f.find('=');
        if (eq == std::string::npos) fail(fmt::format("bad FEATS entry '{}'", f));
        t.feats.emplace_back(f.substr(0, eq), f.substr(eq + 1));
      }
    }
    if (cols[6] != "_") {
      if (!parse_int(cols[6], t.head) || t.head < 0) fail(fmt::format("bad HEAD '{}'", cols[6]));
      if (cols[7] == "_") fail("HEAD without DEPREL");
      t.deprel = std::string(cols[7]);
    }
    t.entity = entity_from_misc(cols[9], file_has_entities);
    current.space_after.push_back(cols[9].find("SpaceAfter=No") == std::string_view::npos);
    current.tokens.push_back(std::move(t));
    if (end == text.size()) break;
  }
  flush();

  std::vector<TokenizedItem> out;
  std::map<std::string, bool> seen;
  for (auto& raw : items) {
    if (seen[raw.id]) throw DataError(fmt::format("{}: duplicate item_id '{}'", source, raw.id));
    seen[raw.id] = true;
    for (const auto& s : raw.sentences) {
      for (const auto& t : s.tokens) {
        if (t.head > static_cast<int>(s.tokens.size())) {
          throw DataError(fmt::format("{}: item '{}': HEAD {} out of range", source, raw.id, t.head));
        }
      }
    }
    out.push_back(finish_item(std::move(raw), file_has_entities));
  }
  return out;
}

std::vector<TokenizedItem> ingest_conllu(const std::string& path) {
  return parse_conllu(csv::read_text(path), path);
}

}  // namespace annolens::lexfeat
