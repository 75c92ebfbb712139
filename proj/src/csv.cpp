#include "cgrpo/csv.hpp"

#include <charconv>
#include <fstream>
#include <limits>

namespace cgrpo {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
  return s;
}

}  // namespace

MissingColumnsError::MissingColumnsError(const std::string& file, std::vector<std::string> missing)
    : std::runtime_error(file + ": missing column(s): " + join(missing)), missing_(std::move(missing)) {}

int CsvTable::index(const std::string& column) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == column) return static_cast<int>(i);
  }
  return -1;
}

void CsvTable::require(const std::vector<std::string>& columns) const {
  std::vector<std::string> missing;
  for (const auto& c : columns) {
    if (index(c) < 0) missing.push_back(c);
  }
  if (!missing.empty()) throw MissingColumnsError(source.string(), std::move(missing));
}

const std::string& CsvTable::at(std::size_t row, const std::string& column) const {
  const int i = index(column);
  if (i < 0) throw MissingColumnsError(source.string(), {column});
  return rows.at(row).at(static_cast<std::size_t>(i));
}

double CsvTable::number(std::size_t row, const std::string& column) const { return parse_number(at(row, column)); }

std::vector<double> CsvTable::numbers(const std::string& column) const {
  require({column});
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out.push_back(number(r, column));
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  CsvTable t;
  t.source = path;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != t.header.size()) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                               std::to_string(fields.size()) + " fields, header has " +
                               std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  return t;
}

double parse_number(const std::string& text) {
  if (text == "nan" || text == "none" || text.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::runtime_error("not a number: '" + text + "'");
  }
  return v;
}

}  // namespace cgrpo
