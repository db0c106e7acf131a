#include "crstd/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "crstd/error.hpp"

namespace crstd::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one record, consuming extra physical lines when a quoted field spans them.
bool read_record(std::istream& in, std::vector<std::string>& cells, std::size_t& line_no,
                 const std::string& source) {
  cells.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  std::string cell;
  bool quoted = false;
  bool was_quoted = false;
  std::size_t i = 0;
  while (true) {
    if (i == line.size()) {
      if (quoted) {
        std::string next;
        if (!std::getline(in, next)) {
          throw ValidationError(source + ": unterminated quoted field at line " +
                                std::to_string(line_no));
        }
        ++line_no;
        cell += '\n';
        line = std::move(next);
        i = 0;
        continue;
      }
      break;
    }
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      cells.push_back(was_quoted ? cell : std::string(trim(cell)));
      cell.clear();
      was_quoted = false;
    } else {
      cell += c;
    }
    ++i;
  }
  cells.push_back(was_quoted ? cell : std::string(trim(cell)));
  return true;
}

}  // namespace

Table read(std::istream& in, const std::string& source) {
  Table table;
  std::size_t line_no = 0;
  std::vector<std::string> cells;
  if (!read_record(in, cells, line_no, source) || (cells.size() == 1 && cells[0].empty())) {
    throw ValidationError(source + ": empty file (no header row)");
  }
  table.header = cells;
  while (read_record(in, cells, line_no, source)) {
    if (cells.size() == 1 && cells[0].empty()) continue;  // blank line
    if (cells.size() != table.header.size()) {
      throw ValidationError(source + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " fields, header has " +
                            std::to_string(table.header.size()));
    }
    table.rows.push_back(cells);
  }
  return table;
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read(in, path.string());
}

void write_row(std::ostream& out, std::span<const std::string> cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    const std::string& c = cells[i];
    if (c.find_first_of(",\"\n") != std::string::npos) {
      out << '"';
      for (char ch : c) {
        if (ch == '"') out << '"';
        out << ch;
      }
      out << '"';
    } else {
      out << c;
    }
  }
  out << '\n';
}

std::string format_number(double value) {
  if (std::isnan(value)) return {};
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

bool parse_number(std::string_view cell, double& out) {
  cell = trim(cell);
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return res.ec == std::errc() && res.ptr == cell.data() + cell.size();
}

}  // namespace crstd::csv
