#include "music/csv.hpp"

#include <fstream>
#include <stdexcept>

namespace music::util {

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.emplace_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

CsvFile read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvFile csv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (csv.header.empty()) {
      csv.header = split_csv_line(line);
      continue;
    }
    csv.rows.push_back(split_csv_line(line));
    csv.row_lines.push_back(lineno);
  }
  return csv;
}

}  // namespace music::util
