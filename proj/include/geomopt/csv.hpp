#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace geomopt {

/// Minimal RFC-4180 table: header row plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws MalformedHeaderError if absent.
  std::size_t column(const std::string& name) const;
};

/// Quotes a cell when it contains a comma, quote, CR or LF.
std::string csv_escape(const std::string& cell);
/// Shortest round-trippable decimal form of a double.
std::string format_double(double v);

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

}  // namespace geomopt
