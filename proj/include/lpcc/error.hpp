#pragma once

#include <stdexcept>
#include <string>

namespace lpcc {

enum class ErrorKind {
  invalid_argument,
  invalid_point,
  degenerate_geometry,
  invalid_beam,
  out_of_range,
  empty_frame,
  corrupt,
  truncated,
  format,
  config_mismatch,
  digest_mismatch,
  numeric,
  usage,
  internal_sync,
  round_trip,
  io,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

// Literal messages are only turned into strings on failure.
inline void require(bool condition, ErrorKind kind, const char* message) {
  if (!condition) fail(kind, message);
}

}  // namespace lpcc
