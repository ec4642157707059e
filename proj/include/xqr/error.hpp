#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace xqr {

enum class ErrorKind {
  InvalidDomain,
  InvalidSize,
  OutOfDomain,
  InvalidOrder,
  InvalidLevel,
  InvalidWidth,
  InvalidArgument,
  SingularSystem,
  AllFitsFailed,
  LadderOverflow,
  NonpositiveQuantile,
  LevelOrder,
  Config,
  Data,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base exception for every recoverable failure in the library. The kind is
/// what callers (notably the CLI exit-code mapping) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a Hill-type estimate would need the log of a nonpositive
/// intermediate quantile. Carries every offending point.
class NonpositiveQuantileError : public Error {
 public:
  NonpositiveQuantileError(const std::string& message, std::vector<double> xs,
                           std::vector<double> levels);

  [[nodiscard]] const std::vector<double>& points() const noexcept { return xs_; }
  [[nodiscard]] const std::vector<double>& levels() const noexcept { return levels_; }

 private:
  std::vector<double> xs_;
  std::vector<double> levels_;
};

namespace detail {
[[noreturn]] void fail(ErrorKind kind, const std::string& message);
void require_level(double tau, const char* what = "tau");
}  // namespace detail

}  // namespace xqr
