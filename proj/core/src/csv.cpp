// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusionforge/csv.hpp"

#include <fstream>
#include <sstream>

#include "fusionforge/error.hpp"

namespace fusionforge::csv {

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw FormatError(FormatErrorCode::kMalformed,
                    "csv: missing column '" + std::string(name) + "'");
}

Table parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;

  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
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
    switch (c) {
      case '"':
        if (!field.empty()) {
          throw FormatError(FormatErrorCode::kMalformed,
                            "csv: stray quote on line " + std::to_string(line));
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row.empty() && !field_started) {  // blank line
          ++line;
          break;
        }
        end_row();
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) {
    throw FormatError(FormatErrorCode::kMalformed, "csv: unterminated quoted field");
  }
  if (field_started || !row.empty()) end_row();

  Table table;
  if (rows.empty()) {
    throw FormatError(FormatErrorCode::kMalformed, "csv: missing header row");
  }
  table.header = std::move(rows.front());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != table.header.size()) {
      throw FormatError(FormatErrorCode::kMalformed,
                        "csv: row " + std::to_string(r + 1) + " has " +
                            std::to_string(rows[r].size()) + " fields, expected " +
                            std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(rows[r]));
  }
  return table;
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << escape(row[i]);
  }
  out << '\n';
}

void write_file(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_row(out, table.header);
  for (const Row& row : table.rows) write_row(out, row);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace fusionforge::csv
