#pragma once

// Minimal RFC 4180 reader/writer: quoted fields, doubled quotes, embedded
// newlines inside quotes, CRLF or LF record separators.

#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "testinj/error.hpp"

namespace testinj::csv {

using Row = std::vector<std::string>;

class Reader {
 public:
  Reader(std::istream& in, std::string source)
      : text_(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()),
        source_(std::move(source)) {
    if (text_.size() >= 3 && text_.compare(0, 3, "\xEF\xBB\xBF") == 0) pos_ = 3;
  }

  // Line number where the most recently returned record started.
  std::size_t line() const { return record_line_; }
  const std::string& source() const { return source_; }

  std::optional<Row> next() {
    if (pos_ >= text_.size()) return std::nullopt;
    record_line_ = line_;
    Row row;
    std::string field;
    bool quoted = false;
    bool after_quote = false;
    while (pos_ < text_.size()) {
      char c = text_[pos_++];
      if (quoted) {
        if (c == '"') {
          if (pos_ < text_.size() && text_[pos_] == '"') {
            field.push_back('"');
            ++pos_;
          } else {
            quoted = false;
            after_quote = true;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(c);
        }
        continue;
      }
      if (c == ',') {
        row.push_back(std::move(field));
        field.clear();
        after_quote = false;
      } else if (c == '\r' && pos_ < text_.size() && text_[pos_] == '\n') {
        continue;
      } else if (c == '\n') {
        ++line_;
        row.push_back(std::move(field));
        return row;
      } else if (c == '"') {
        if (!field.empty() || after_quote)
          throw ParseError(source_, line_, column(), "unexpected quote inside unquoted field");
        quoted = true;
      } else {
        if (after_quote)
          throw ParseError(source_, line_, column(), "characters after closing quote");
        field.push_back(c);
      }
    }
    if (quoted) throw ParseError(source_, record_line_, 0, "unterminated quoted field");
    row.push_back(std::move(field));
    return row;
  }

 private:
  std::size_t column() const {
    auto nl = text_.rfind('\n', pos_ ? pos_ - 1 : 0);
    return nl == std::string::npos ? pos_ : pos_ - nl - 1;
  }

  std::string text_;
  std::string source_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t record_line_ = 1;
};

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << quote(row[i]);
  }
  out << '\n';
}

}  // namespace testinj::csv
