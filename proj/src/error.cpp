#include "xqr/error.hpp"

#include <cmath>
#include <sstream>

namespace xqr {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidDomain: return "invalid-domain";
    case ErrorKind::InvalidSize: return "invalid-size";
    case ErrorKind::OutOfDomain: return "out-of-domain";
    case ErrorKind::InvalidOrder: return "invalid-order";
    case ErrorKind::InvalidLevel: return "invalid-level";
    case ErrorKind::InvalidWidth: return "invalid-width";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::SingularSystem: return "singular-system";
    case ErrorKind::AllFitsFailed: return "all-fits-failed";
    case ErrorKind::LadderOverflow: return "ladder-overflow";
    case ErrorKind::NonpositiveQuantile: return "nonpositive-quantile";
    case ErrorKind::LevelOrder: return "level-order";
    case ErrorKind::Config: return "config";
    case ErrorKind::Data: return "data";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

NonpositiveQuantileError::NonpositiveQuantileError(const std::string& message,
                                                   std::vector<double> xs,
                                                   std::vector<double> levels)
    : Error(ErrorKind::NonpositiveQuantile, message),
      xs_(std::move(xs)),
      levels_(std::move(levels)) {}

namespace detail {

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

void require_level(double tau, const char* what) {
  if (!(tau > 0.0 && tau < 1.0)) {
    std::ostringstream os;
    os << what << " must lie in (0, 1), got " << tau;
    fail(ErrorKind::InvalidLevel, os.str());
  }
}

}  // namespace detail
}  // namespace xqr
