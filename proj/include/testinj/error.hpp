#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace testinj {

// Base for every error the library throws on its own behalf.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (lexicon files, WordNet files, CSV, DOT).
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, std::size_t column,
             const std::string& what)
      : Error(source + ":" + std::to_string(line) + ":" + std::to_string(column) +
              ": " + what),
        line_(line),
        column_(column) {}

  // For byte-addressed formats (WordNet data files).
  static ParseError at_offset(const std::string& source, std::size_t offset,
                              const std::string& what) {
    ParseError e(source + " @ byte " + std::to_string(offset) + ": " + what);
    e.line_ = 0;
    e.column_ = offset;
    return e;
  }

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  explicit ParseError(const std::string& what) : Error(what) {}
  std::size_t line_ = 0;
  std::size_t column_ = 0;
};

// A value violates a documented precondition (negative age, alpha outside (0,1), ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Background knowledge cannot be honoured by the graph.
class ConstraintViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace testinj
