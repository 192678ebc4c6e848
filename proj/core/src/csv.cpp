#include "ordflow/csv.hpp"

#include <cmath>
#include <cstdio>

#include "ordflow/error.hpp"

namespace ordflow {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) throw DimensionError("csv table needs at least one column");
}

void CsvTable::add_row(std::initializer_list<CsvCell> cells) { add_row(std::vector<CsvCell>(cells)); }

void CsvTable::add_row(const std::vector<CsvCell>& cells) {
  if (cells.size() != columns_.size())
    throw DimensionError("csv row has " + std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(columns_.size()));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) body_ += ',';
    body_ += quote(cells[i].text());
  }
  body_ += '\n';
  ++rows_;
}

std::string CsvTable::str() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) out += ',';
    out += quote(columns_[i]);
  }
  return out + '\n' + body_;
}

}  // namespace ordflow
