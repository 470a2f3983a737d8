#include "tempmask/error.hpp"

namespace tempmask {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::validation: return "validation error";
    case ErrorKind::sampling: return "sampling error";
    case ErrorKind::association: return "association error";
    case ErrorKind::evaluation: return "evaluation error";
    case ErrorKind::protocol: return "protocol error";
    case ErrorKind::timeout: return "timeout";
    case ErrorKind::io: return "I/O error";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::internal: return "internal error";
  }
  return "unknown error";
}

}  // namespace tempmask
