#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace langsel {

// Failure classes map one-to-one onto CLI exit codes.
enum class ErrorKind {
  validation = 1,
  infeasible = 2,
  budget_exceeded = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

inline Error validation_error(const std::string& what) {
  return Error(ErrorKind::validation, what);
}

inline Error infeasible_error(const std::string& what) {
  return Error(ErrorKind::infeasible, what);
}

inline Error budget_error(const std::string& what) {
  return Error(ErrorKind::budget_exceeded, what);
}

// "file:line:column: message", columns and lines 1-based.
inline Error parse_error(const std::string& file, std::size_t line,
                         std::size_t column, const std::string& message) {
  return validation_error(file + ":" + std::to_string(line) + ":" +
                          std::to_string(column) + ": " + message);
}

}  // namespace langsel
