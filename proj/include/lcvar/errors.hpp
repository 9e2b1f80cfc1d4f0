#pragma once

#include <stdexcept>
#include <string>

namespace lcvar {

// Error taxonomy. `validation`-family errors mean the caller handed us
// something malformed (CLI exit code 1); the rest are numeric/model
// failures discovered mid-computation (CLI exit code 2).
enum class ErrorKind {
  validation,
  dimension,
  parse,
  insufficient_data,
  degenerate_data,
  model,
  sampling,
  numeric,
  conditioning,
  assumption,
  initialization,
  estimation,
};

const char* error_kind_name(ErrorKind kind);

// True for kinds caused by bad input rather than numeric failure.
bool is_validation_kind(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace lcvar
