#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace snot {

// Numeric CSV with a single header row. Lines starting with '#' are comments
// and are skipped on read; writers use them for run metadata such as timestamps.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
};

// Shortest representation that parses back to the identical double.
std::string format_double(double v);

void write_csv(std::ostream& os, const CsvTable& table, const std::string& comment = {});
void write_csv(const std::filesystem::path& path, const CsvTable& table,
               const std::string& comment = {});
CsvTable read_csv(std::istream& is);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace snot
