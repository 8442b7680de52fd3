#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace annolens::csv {

using Row = std::vector<std::string>;

/// A parsed delimiter-separated table. `line_of[i]` is the 1-based physical
/// line on which row `i` starts (the header is on line 1).
struct Table {
  Row header;
  std::vector<Row> rows;
  std::vector<std::size_t> line_of;

  /// Index of a header column, or throws DataError naming `source`.
  std::size_t column(std::string_view name, std::string_view source) const;
};

/// RFC 4180 style reader: quoted fields may contain delimiters, doubled
/// quotes and newlines. A UTF-8 byte order mark is skipped. Every row must
/// have as many fields as the header.
Table parse(std::string_view text, char delimiter, std::string_view source);
Table read_file(const std::string& path, char delimiter = ',');

/// Quotes a field only when it contains the delimiter, a quote or a newline.
std::string escape(std::string_view field, char delimiter);
void write_row(std::ostream& out, const Row& row, char delimiter = ',');

std::string read_text(const std::string& path);
void write_text(const std::string& path, std::string_view text);

}  // namespace annolens::csv
