#include "annolens/csv.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "annolens/error.hpp"

namespace annolens::csv {

std::size_t Table::column(std::string_view name, std::string_view source) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw DataError(fmt::format("{}: missing column '{}'", source, name));
}

Table parse(std::string_view text, char delimiter, std::string_view source) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  Table table;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t row_line = 1;
  bool header_done = false;

  auto finish_row = [&]() {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
    // blank lines are skipped
    if (row.size() == 1 && row[0].empty()) {
      row.clear();
      return;
    }
    if (!header_done) {
      table.header = std::move(row);
      header_done = true;
    } else {
      if (row.size() != table.header.size()) {
        throw DataError(fmt::format("{}:{}: expected {} fields, found {}", source, row_line,
                                    table.header.size(), row.size()));
      }
      table.rows.push_back(std::move(row));
      table.line_of.push_back(row_line);
    }
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == delimiter) {
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (c == '\r') {
      // tolerated before \n
    } else if (c == '\n') {
      finish_row();
      ++line;
      row_line = line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw DataError(fmt::format("{}:{}: unterminated quoted field", source, row_line));
  if (!row.empty() || !field.empty() || field_started) finish_row();
  if (!header_done) throw DataError(fmt::format("{}: empty file", source));
  return table;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, std::string_view text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

Table read_file(const std::string& path, char delimiter) {
  return parse(read_text(path), delimiter, path);
}

std::string escape(std::string_view field, char delimiter) {
  const bool needs_quotes = field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) !=
                                std::string_view::npos ||
                            (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row, char delimiter) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out.put(delimiter);
    out << escape(row[i], delimiter);
  }
  out.put('\n');
}

}  // namespace annolens::csv
