#include "otfwi/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "otfwi/error.hpp"

namespace otfwi {

std::string csv_escape(const std::string& f) {
  if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw InvalidArgument("CSV table needs at least one column");
}

void CsvTable::add_row(std::vector<CsvCell> row) {
  if (row.size() != header_.size()) throw InvalidArgument("CSV row width does not match the header");
  rows_.push_back(std::move(row));
}

std::string CsvTable::to_string() const {
  std::string out;
  auto line = [&out](const auto& cells, auto fmt) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) out += ',';
      out += fmt(cells[k]);
    }
    out += "\r\n";
  };
  line(header_, [](const std::string& s) { return csv_escape(s); });
  for (const auto& r : rows_)
    line(r, [](const CsvCell& c) {
      if (const auto* s = std::get_if<std::string>(&c)) return csv_escape(*s);
      if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
      return std::to_string(std::get<long long>(c));
    });
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string s = to_string();
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace otfwi
