#include <sstream>

#include "lens/errors.hpp"
#include "lens/tensor.hpp"

namespace lens {

const char* to_string(ParseErrorKind kind) noexcept {
  switch (kind) {
    case ParseErrorKind::kBadMagic:
      return "bad_magic";
    case ParseErrorKind::kVersionMismatch:
      return "version_mismatch";
    case ParseErrorKind::kTruncated:
      return "truncated";
    case ParseErrorKind::kInconsistentDim:
      return "inconsistent_dim";
    case ParseErrorKind::kFormat:
      return "format";
    case ParseErrorKind::kUnknownId:
      return "unknown_id";
  }
  return "unknown";
}

ParseError::ParseError(ParseErrorKind kind, std::string file, std::int64_t record,
                       const std::string& detail)
    : Error(std::string("parse.") + to_string(kind),
            file + (record >= 0 ? ":" + std::to_string(record) : std::string()) + ": " + detail),
      parse_kind_(kind),
      file_(std::move(file)),
      record_(record) {}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

}  // namespace lens
