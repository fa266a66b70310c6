#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace calib {

/// Invalid run configuration, detected before any step executes.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Malformed input row; `line` is 1-based and counts the header.
class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

struct OrderingError : ParseError {
  using ParseError::ParseError;
};

/// Input file that cannot be opened.
struct InputFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Value outside the configured scaling range in strict mode.
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

}  // namespace calib
