#include "flowcast/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "flowcast/errors.hpp"

namespace flowcast::csv {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const auto piece = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    out.emplace_back(trim(piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  Table table;
  table.source = path.string();
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ParseError(table.source, line_no,
                       "expected " + std::to_string(table.header.size()) + " fields, got " +
                           std::to_string(fields.size()));
    }
    table.rows.push_back({line_no, std::move(fields)});
  }
  if (!have_header) throw ParseError(table.source, 1, "missing header");
  return table;
}

bool header_is(const Table& table, const std::vector<std::string_view>& expected) {
  if (table.header.size() != expected.size()) return false;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (table.header[i] != expected[i]) return false;
  }
  return true;
}

void require_header(const Table& table, const std::vector<std::string_view>& expected) {
  if (header_is(table, expected)) return;
  std::string want;
  for (auto e : expected) {
    if (!want.empty()) want += ',';
    want += e;
  }
  throw ParseError(table.source, 1, "expected header '" + want + "'");
}

std::optional<double> parse_optional_double(const Table& table, const Row& row,
                                            std::size_t column) {
  const std::string& s = row.fields.at(column);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(table.source, row.line,
                     "column '" + table.header.at(column) + "': not a number: '" + s + "'");
  }
  return v;
}

double parse_double(const Table& table, const Row& row, std::size_t column) {
  auto v = parse_optional_double(table, row, column);
  if (!v) {
    throw ParseError(table.source, row.line, "column '" + table.header.at(column) + "' is empty");
  }
  return *v;
}

std::uint64_t parse_uint(const Table& table, const Row& row, std::size_t column) {
  const std::string& s = row.fields.at(column);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(table.source, row.line,
                     "column '" + table.header.at(column) + "': not a nonnegative integer: '" +
                         s + "'");
  }
  return v;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  const std::string str(text);
  int consumed = 0;
  const int n = std::sscanf(str.c_str(), "%4d-%2u-%2u%c%2u:%2u%n", &y, &mo, &d, &sep, &h, &mi,
                            &consumed);
  if (n < 6 || (sep != 'T' && sep != ' ')) return std::nullopt;
  std::string_view rest = text.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty()) {
    int more = 0;
    const std::string tail(rest);
    if (std::sscanf(tail.c_str(), ":%2u%n", &s, &more) != 1 ||
        static_cast<std::size_t>(more) != tail.size()) {
      return std::nullopt;
    }
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

}  // namespace flowcast::csv
