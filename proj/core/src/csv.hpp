#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace mhscreen::detail {

struct CsvRow {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// RFC 4180 reader: quoted fields may hold commas, doubled quotes and line
// breaks. Accepts LF or CRLF and skips a leading UTF-8 BOM.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // False at end of input. Throws Error(kParse) on an unterminated quote.
  bool next(CsvRow& row);

 private:
  int get();
  int peek();

  std::istream& in_;
  std::size_t line_ = 1;
  bool started_ = false;
};

std::string csv_escape(std::string_view field);

}  // namespace mhscreen::detail
