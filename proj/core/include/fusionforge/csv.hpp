// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fusionforge::csv {

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;

  /// Index of a header column; throws FormatError when absent.
  std::size_t column(std::string_view name) const;
};

/// RFC 4180 parsing: quoted fields may contain commas, quotes ("") and
/// newlines. Every row must have as many fields as the header.
Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);
void write_file(const std::filesystem::path& path, const Table& table);

}  // namespace fusionforge::csv
