#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "maxent/matrix.hpp"

namespace maxent {

/// Malformed CSV input; the message names the line and column.
class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

/// Header row of names followed by numeric rows of equal width.
CsvTable read_numeric_csv(const std::filesystem::path& path);
CsvTable parse_numeric_csv(const std::string& text, const std::string& source = "<memory>");

/// Shortest text that parses back to the same double.
std::string format_double(double value);

void write_csv_row(std::ostream& out, std::span<const std::string> fields);
void write_numeric_csv(const std::filesystem::path& path, std::span<const std::string> header, const Matrix& rows);

}  // namespace maxent
