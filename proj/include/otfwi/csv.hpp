#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace otfwi {

using CsvCell = std::variant<std::string, double, long long>;

/// RFC-4180 table with a header row. Doubles print with 17 significant digits.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(std::vector<CsvCell> row);
  std::string to_string() const;
  void write(const std::filesystem::path& path) const;
  std::size_t rows() const noexcept { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<CsvCell>> rows_;
};

std::string csv_escape(const std::string& field);
std::string format_double(double v);

}  // namespace otfwi
