#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace raisdr {

/// A parsed CSV document with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based source line of each row, for error messages.
  std::vector<std::size_t> lines;

  std::optional<std::size_t> column(std::string_view name) const;
  /// Throws Error(SchemaError) naming the first missing column.
  std::vector<std::size_t> require(
      std::span<const std::string_view> names) const;
};

/// Comma-separated with optional double quotes, blank lines skipped. Throws
/// Error(SchemaError) on an empty document and ParseError on ragged rows.
CsvTable parse_csv(std::string_view text);

std::string read_text_file(const std::string& path);

/// Quotes a field when needed; embedded quotes and backslashes are
/// backslash-escaped to match parse_csv.
std::string csv_field(std::string_view value);

}  // namespace raisdr
