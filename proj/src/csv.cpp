#include "snot/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "snot/error.hpp"

namespace snot {

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ShapeError("csv: no column named '" + name + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& os, const CsvTable& table, const std::string& comment) {
  if (!comment.empty()) os << "# " << comment << '\n';
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) os << ',';
    os << table.header[i];
  }
  os << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw ShapeError("csv: row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << format_double(row[i]);
    }
    os << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const CsvTable& table,
               const std::string& comment) {
  std::ofstream os(path);
  if (!os) throw ConfigError("csv: cannot open '" + path.string() + "' for writing");
  write_csv(os, table, comment);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && *first == ' ') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("csv: bad number '" + s + "' on line " + std::to_string(line_no));
  }
  return v;
}

}  // namespace

CsvTable read_csv(std::istream& is) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw ConfigError("csv: line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(table.header.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, line_no));
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw ConfigError("csv: missing header");
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("csv: cannot open '" + path.string() + "'");
  return read_csv(is);
}

}  // namespace snot
