#pragma once

#include <stdexcept>
#include <string>

namespace tlr {

/// Malformed input data (trace files, rule files, formula text).
/// Carries a 1-based line number when the source is line-delimited.
class ParseError : public std::runtime_error {
public:
  ParseError(std::string msg, long line = -1)
      : std::runtime_error(line >= 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  long line() const { return line_; }

private:
  long line_;
};

/// A requested operation is well-formed but cannot succeed on this input
/// (e.g. no compliant demonstration exists for a scenario).
class InfeasibleError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Problem size exceeds a hard algorithmic limit (e.g. truth-table width).
class CapacityError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Inconsistent configuration (unknown predicate in rules, registry mismatch).
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace tlr
