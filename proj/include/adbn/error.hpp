#pragma once

#include <stdexcept>
#include <string>

namespace adbn {

// Error classes map one-to-one onto the C API status codes.
enum class ErrorKind {
  InvalidArgument,
  Dimension,
  Io,
  Format,
  Config,
  Numeric,
  State,
};

const char* error_kind_name(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& message);

}  // namespace adbn
