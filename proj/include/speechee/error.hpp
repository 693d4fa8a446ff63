#ifndef SPEECHEE_ERROR_HPP_
#define SPEECHEE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace speechee {

// Base error for all library failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Grammar violation while parsing a linearized record string.
// token_index points at the offending token (or the end of input).
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t token_index)
      : Error(msg + " (at token " + std::to_string(token_index) + ")"),
        token_index_(token_index) {}
  std::size_t token_index() const { return token_index_; }

 private:
  std::size_t token_index_;
};

// A record or schema failed validation.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

}  // namespace speechee

#endif  // SPEECHEE_ERROR_HPP_
