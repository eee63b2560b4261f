#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bteflow {

/// Half-open byte range into the source text an expression was parsed from.
struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  [[nodiscard]] bool empty() const noexcept { return begin == end; }
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed equation text, entity declarations or config files.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, SourceSpan span = {})
      : Error(span.empty() ? what
                           : what + " (at column " + std::to_string(span.begin + 1) + ")"),
        span_(span) {}
  [[nodiscard]] SourceSpan span() const noexcept { return span_; }

 private:
  SourceSpan span_;
};

/// Well-formed input that violates a cross-reference or range constraint.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failure while advancing the solution (non-convergence, non-finite state, worker failure).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace bteflow
