#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ebench::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source file
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  // Index of a header column, or throws ValidationError naming it.
  std::size_t column(std::string_view name) const;
};

// Minimal RFC-4180 reader: comma separated, double-quoted fields may contain
// commas and doubled quotes. Blank lines are skipped.
Table parse(std::istream& in);
Table read_file(const std::filesystem::path& path);

std::string escape(std::string_view field);
std::string format_double(double v);

// Writes `header` then each row, escaping as needed.
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace ebench::csv
