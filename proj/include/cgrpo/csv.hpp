#ifndef CGRPO_CSV_HPP_
#define CGRPO_CSV_HPP_

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgrpo {

/// Raised when a CSV lacks required columns; what() lists them by name.
class MissingColumnsError : public std::runtime_error {
 public:
  MissingColumnsError(const std::string& file, std::vector<std::string> missing);
  const std::vector<std::string>& missing() const { return missing_; }

 private:
  std::vector<std::string> missing_;
};

/// Plain comma-separated table (no quoting) as written by this project.
struct CsvTable {
  std::filesystem::path source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// -1 when absent.
  int index(const std::string& column) const;
  /// Throws MissingColumnsError naming every absent column.
  void require(const std::vector<std::string>& columns) const;
  const std::string& at(std::size_t row, const std::string& column) const;
  double number(std::size_t row, const std::string& column) const;
  std::vector<double> numbers(const std::string& column) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// "nan" and "none" read as NaN.
double parse_number(const std::string& text);

}  // namespace cgrpo

#endif  // CGRPO_CSV_HPP_
