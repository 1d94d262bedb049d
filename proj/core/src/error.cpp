#include "icnnpd/error.hpp"

#include <sstream>

namespace icnnpd {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "shape mismatch";
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::DegenerateGeometry: return "degenerate geometry";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::MissingFile: return "missing file";
    case ErrorKind::Admissibility: return "admissibility violation";
    case ErrorKind::Certification: return "step-size certification failure";
    case ErrorKind::NonFinite: return "non-finite iterate";
    case ErrorKind::Config: return "config error";
  }
  return "error";
}

ShapeError::ShapeError(const std::string& context, Shape expected, Shape actual)
    : Error(ErrorKind::ShapeMismatch,
            context + ": expected shape " + to_string(expected) + ", got " +
                to_string(actual)),
      expected_(std::move(expected)),
      actual_(std::move(actual)) {}

NonFiniteError::NonFiniteError(std::size_t iteration, std::string block)
    : Error(ErrorKind::NonFinite, "non-finite value in block '" + block +
                                      "' at iteration " +
                                      std::to_string(iteration)),
      iteration_(iteration),
      block_(std::move(block)) {}

CertificationError::CertificationError(std::string inequality, double value)
    : Error(ErrorKind::Certification,
            "step sizes violate " + inequality + " (value " +
                std::to_string(value) + ")"),
      inequality_(std::move(inequality)),
      value_(value) {}

}  // namespace icnnpd
