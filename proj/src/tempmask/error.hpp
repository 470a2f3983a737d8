#pragma once

#include <stdexcept>
#include <string>

namespace tempmask {

enum class ErrorKind {
  parameter,
  parse,
  validation,
  sampling,
  association,
  evaluation,
  protocol,
  timeout,
  io,
  config,
  internal,
};

const char* to_string(ErrorKind kind) noexcept;

// All library failures surface as this exception; the C API maps `kind` onto
// its status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace tempmask
