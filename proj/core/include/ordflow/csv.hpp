#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace ordflow {

// Shortest round-trip-safe text: 17 significant digits.
std::string format_number(double v);

class CsvCell {
 public:
  CsvCell(double v) : text_(format_number(v)) {}
  CsvCell(int v) : text_(std::to_string(v)) {}
  CsvCell(long v) : text_(std::to_string(v)) {}
  CsvCell(unsigned long v) : text_(std::to_string(v)) {}
  CsvCell(unsigned long long v) : text_(std::to_string(v)) {}
  CsvCell(const char* s) : text_(s) {}
  CsvCell(std::string s) : text_(std::move(s)) {}
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

// Long-format table: a fixed header and rows of equal length.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);
  void add_row(std::initializer_list<CsvCell> cells);
  void add_row(const std::vector<CsvCell>& cells);
  std::size_t columns() const { return columns_.size(); }
  std::size_t rows() const { return rows_; }
  std::string str() const;

 private:
  std::vector<std::string> columns_;
  std::string body_;
  std::size_t rows_ = 0;
};

}  // namespace ordflow
