#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace astgin::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  std::optional<std::size_t> find_column(std::string_view name) const;
  // Throws ValidationError naming the missing column.
  std::size_t require_column(std::string_view name) const;
};

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Splits one comma-delimited record; double-quoted fields may contain commas
// and doubled quotes. Fields are trimmed.
std::vector<std::string> split_line(std::string_view line);

// Blank lines are skipped. The first non-blank line is the header.
Table read(std::istream& in);
Table read_file(const std::filesystem::path& path);

// Shortest representation that round-trips to the same double.
std::string format_number(double v);

std::string join(const std::vector<std::string>& fields);

void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace astgin::csv
