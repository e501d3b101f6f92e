#include "maxent/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace maxent {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

CsvTable parse_numeric_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  CsvTable table;
  std::vector<double> flat;
  std::size_t rows = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (!have_header) {
      for (auto& f : fields) table.header.push_back(trim(f));
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw CsvError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                     " fields, header has " + std::to_string(table.header.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string cell = trim(fields[c]);
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v))
        throw CsvError(source + ": non-numeric value '" + cell + "' at line " + std::to_string(line_no) +
                       ", column " + std::to_string(c + 1) + " (" + table.header[c] + ")");
      flat.push_back(v);
    }
    ++rows;
  }
  if (!have_header) throw CsvError(source + ": empty file, expected a header row");
  table.values = Matrix(rows, table.header.size());
  std::copy(flat.begin(), flat.end(), table.values.data().begin());
  return table;
}

CsvTable read_numeric_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_numeric_csv(buf.str(), path.string());
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_csv_row(std::ostream& out, std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << fields[i];
  }
  out << '\n';
}

void write_numeric_csv(const std::filesystem::path& path, std::span<const std::string> header, const Matrix& rows) {
  if (header.size() != rows.cols()) throw std::invalid_argument("write_numeric_csv: header width mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv_row(out, header);
  std::vector<std::string> fields(rows.cols());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t c = 0; c < rows.cols(); ++c) fields[c] = format_double(rows(r, c));
    write_csv_row(out, fields);
  }
}

}  // namespace maxent
