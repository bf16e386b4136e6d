#pragma once

#include <stdexcept>
#include <string>

namespace tetsolve {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid user input: bad spec, bad config, precondition violation.
class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// Malformed input file; message carries file and line/record position.
class ParseError : public ValidationError {
public:
  ParseError(const std::string& file, long line, const std::string& msg)
      : ValidationError(file + ":" + std::to_string(line) + ": " + msg) {}
};

/// Iterative solver did not reach its tolerance (cap hit, breakdown, NaN).
class SolverError : public Error {
public:
  explicit SolverError(const std::string& msg) : Error(msg) {}
};

} // namespace tetsolve
