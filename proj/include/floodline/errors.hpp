#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace floodline {

/// Malformed or unreadable input data. Maps to CLI exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text parse failure carrying the 1-based line number of the offending token.
class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Binary payload failure carrying the byte offset where decoding stopped.
class FormatError : public InputError {
 public:
  FormatError(std::size_t offset, const std::string& what)
      : InputError("byte " + std::to_string(offset) + ": " + what), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A pipeline stage could not complete (missing upstream output, missing layer).
/// Maps to CLI exit code 2.
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace floodline
