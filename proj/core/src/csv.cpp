#include "csv.hpp"

#include "mhscreen/error.hpp"

namespace mhscreen::detail {

int CsvReader::get() { return in_.get(); }
int CsvReader::peek() { return in_.peek(); }

bool CsvReader::next(CsvRow& row) {
  if (!started_) {
    started_ = true;
    if (peek() == 0xEF) {
      char bom[3];
      in_.read(bom, 3);
      if (!(bom[0] == '\xEF' && bom[1] == '\xBB' && bom[2] == '\xBF')) {
        in_.clear();
        in_.seekg(0);
      }
    }
  }
  row.fields.clear();
  row.line = line_;
  if (peek() == std::char_traits<char>::eof()) return false;

  std::string field;
  bool quoted = false;
  bool after_quote = false;
  for (;;) {
    int c = get();
    if (quoted) {
      if (c == std::char_traits<char>::eof()) {
        throw Error(ErrorCode::kParse,
                    "unterminated quoted field starting at line " + std::to_string(row.line));
      }
      if (c == '"') {
        if (peek() == '"') {
          get();
          field.push_back('"');
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line_;
        field.push_back(static_cast<char>(c));
      }
      continue;
    }
    if (c == std::char_traits<char>::eof() || c == '\n' || c == '\r') {
      if (c == '\r' && peek() == '\n') get();
      if (c != std::char_traits<char>::eof()) ++line_;
      row.fields.push_back(std::move(field));
      return true;
    }
    if (c == ',') {
      row.fields.push_back(std::move(field));
      field.clear();
      after_quote = false;
    } else if (c == '"' && field.empty() && !after_quote) {
      quoted = true;
    } else {
      field.push_back(static_cast<char>(c));
    }
  }
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace mhscreen::detail
