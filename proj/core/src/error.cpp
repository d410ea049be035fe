#include "lddr/error.hpp"

namespace lddr {

const char* to_string(ParseErrorKind kind) noexcept {
  switch (kind) {
    case ParseErrorKind::malformed_header: return "malformed header";
    case ParseErrorKind::truncated: return "truncated";
    case ParseErrorKind::shape_mismatch: return "shape mismatch";
    case ParseErrorKind::unsupported_version: return "unsupported version";
    case ParseErrorKind::trailing_data: return "trailing data";
    case ParseErrorKind::count_mismatch: return "count mismatch";
    case ParseErrorKind::bad_token: return "bad token";
    case ParseErrorKind::unsupported_format: return "unsupported format";
  }
  return "unknown";
}

namespace {

std::string decorate(ParseErrorKind kind, const std::string& what, int line) {
  std::string msg = std::string(to_string(kind)) + ": " + what;
  if (line > 0) msg += " (line " + std::to_string(line) + ")";
  return msg;
}

}  // namespace

ParseError::ParseError(ParseErrorKind kind, const std::string& what, int line)
    : Error(decorate(kind, what, line)), kind_(kind), line_(line), detail_(what) {}

}  // namespace lddr
