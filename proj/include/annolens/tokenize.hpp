#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace annolens::lexfeat {

struct Token {
  std::string text;
  /// Byte offsets into TokenizedItem::text.
  std::size_t begin = 0;
  std::size_t end = 0;
  bool is_punct = false;

  // Annotation layers; empty / -1 when the layer is absent.
  std::string lemma;
  std::string upos;
  std::vector<std::pair<std::string, std::string>> feats;
  int head = -1;  ///< 0 = root, otherwise 1-based index within the sentence
  std::string deprel;
  std::string entity;  ///< BIO tag such as "B-PERSON", or "O"
};

struct Layers {
  bool lemma = false;
  bool pos = false;
  bool morph = false;
  bool dependency = false;
  bool entity = false;
};

struct TokenizedItem {
  std::string item_id;
  std::string text;
  std::vector<std::vector<Token>> sentences;
  Layers layers;
  /// Conditions noticed while reading, e.g. "partial_layer:pos".
  std::vector<std::string> flags;
};

/// Rule-based segmentation of raw text. See README, "Tokenization rules".
TokenizedItem tokenize(std::string_view text, std::string item_id = {});

/// Reads CoNLL-U where each item starts with a `# item_id = <id>` comment.
/// Multiword-token ranges and empty nodes are skipped.
std::vector<TokenizedItem> parse_conllu(std::string_view text, std::string_view source);
std::vector<TokenizedItem> ingest_conllu(const std::string& path);

/// Number of UTF-8 code points.
std::size_t utf8_length(std::string_view s);

/// All non-punctuation tokens in reading order.
std::vector<const Token*> word_tokens(const TokenizedItem& item);

}  // namespace annolens::lexfeat
