#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace crstd::csv {

// Raw cell grid. Quoted fields may contain commas, quotes ("") and newlines.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read(std::istream& in, const std::string& source = "<stream>");
Table read_file(const std::filesystem::path& path);

void write_row(std::ostream& out, std::span<const std::string> cells);

// Shortest representation that parses back to the same double; NaN -> "".
std::string format_number(double value);

// Strict parse of a whole cell; leading/trailing blanks tolerated.
bool parse_number(std::string_view cell, double& out);

}  // namespace crstd::csv
