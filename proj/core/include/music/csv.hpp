#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace music::util {

// Minimal CSV support for the trace/segment formats: comma-separated,
// no quoting, one record per line. Blank lines are skipped.
std::vector<std::string> split_csv_line(std::string_view line);

struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;  // 1-based source line of each row
};

// Reads a CSV file with a header row. Throws std::runtime_error if the file
// cannot be opened.
CsvFile read_csv(const std::string& path);

}  // namespace music::util
