#include "lcvar/errors.hpp"

namespace lcvar {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation error";
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::insufficient_data: return "insufficient-data error";
    case ErrorKind::degenerate_data: return "degenerate-data error";
    case ErrorKind::model: return "model error";
    case ErrorKind::sampling: return "sampling error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::conditioning: return "conditioning error";
    case ErrorKind::assumption: return "assumption error";
    case ErrorKind::initialization: return "initialization error";
    case ErrorKind::estimation: return "estimation error";
  }
  return "error";
}

bool is_validation_kind(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation:
    case ErrorKind::dimension:
    case ErrorKind::parse:
    case ErrorKind::insufficient_data:
    case ErrorKind::degenerate_data:
    case ErrorKind::model:
      return true;
    default:
      return false;
  }
}

}  // namespace lcvar
