#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flowcast::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source file
  std::vector<std::string> fields;
};

struct Table {
  std::string source;
  std::vector<std::string> header;
  std::vector<Row> rows;
};

// Reads a comma-separated file with a header line. Blank lines are skipped,
// surrounding whitespace and a trailing '\r' are trimmed from every field.
// Throws InputError if the file cannot be opened, ParseError on ragged rows.
Table read(const std::filesystem::path& path);

// Throws ParseError (line 1) unless the header equals `expected`.
void require_header(const Table& table, const std::vector<std::string_view>& expected);
bool header_is(const Table& table, const std::vector<std::string_view>& expected);

double parse_double(const Table& table, const Row& row, std::size_t column);
std::optional<double> parse_optional_double(const Table& table, const Row& row,
                                            std::size_t column);
std::uint64_t parse_uint(const Table& table, const Row& row, std::size_t column);

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

using Timestamp = std::chrono::sys_seconds;

// Accepts "YYYY-MM-DDTHH:MM[:SS]" (a space also separates date and time).
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

}  // namespace flowcast::csv
