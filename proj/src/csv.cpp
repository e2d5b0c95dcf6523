#include "raisdr/csv.hpp"

#include <fstream>
#include <sstream>

#include <boost/tokenizer.hpp>

#include "raisdr/error.hpp"

namespace raisdr {

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> CsvTable::require(
    std::span<const std::string_view> names) const {
  std::vector<std::size_t> out;
  for (auto name : names) {
    const auto idx = column(name);
    if (!idx) {
      throw Error(ErrorCode::SchemaError,
                  "missing column '" + std::string(name) + "'");
    }
    out.push_back(*idx);
  }
  return out;
}

CsvTable parse_csv(std::string_view text) {
  using Tokenizer =
      boost::tokenizer<boost::escaped_list_separator<char>>;
  // Quoted fields escape '"' and '\\' with a backslash.
  const boost::escaped_list_separator<char> sep('\\', ',', '"');

  CsvTable table;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  bool have_header = false;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> fields;
    try {
      Tokenizer tok(line, sep);
      fields.assign(tok.begin(), tok.end());
    } catch (const boost::escaped_list_error& e) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
    table.lines.push_back(line_no);
  }
  if (!have_header) {
    throw Error(ErrorCode::SchemaError, "empty CSV document (no header)");
  }
  return table;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\\\n") == std::string_view::npos) {
    return std::string(value);
  }
  std::string out = "\"";
  for (char c : value) {
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace raisdr
