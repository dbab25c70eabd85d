#include "lpcc/error.hpp"

namespace lpcc {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::invalid_point: return "invalid point";
    case ErrorKind::degenerate_geometry: return "degenerate geometry";
    case ErrorKind::invalid_beam: return "invalid beam";
    case ErrorKind::out_of_range: return "out of range";
    case ErrorKind::empty_frame: return "empty frame";
    case ErrorKind::corrupt: return "corrupt data";
    case ErrorKind::truncated: return "truncated data";
    case ErrorKind::format: return "format error";
    case ErrorKind::config_mismatch: return "config mismatch";
    case ErrorKind::digest_mismatch: return "digest mismatch";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::usage: return "usage error";
    case ErrorKind::internal_sync: return "internal sync error";
    case ErrorKind::round_trip: return "round-trip failure";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

}  // namespace lpcc
