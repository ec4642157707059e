/**
 * @file cli.hpp
 * @brief The fit / tail / simulate / classify workflows behind the xqr tool.
 *
 * Exit codes: 0 success, 2 configuration error, 3 data or I/O error,
 * 4 numerical failure.
 */
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "xqr/error.hpp"
#include "xqr/evt.hpp"
#include "xqr/simlab.hpp"

namespace xqr {

struct RunConfig {
  std::string input;
  std::string x_col = "x";
  std::string y_col = "y";
  double tau = 0.5;
  double tau_e = 0.99;
  int knots = 40;
  int degree = 3;
  int penalty_order = 2;
  std::optional<double> lambda;  ///< empty: GACV
  std::optional<double> eta;     ///< ladder exponent; wins over xi when set
  double xi = 3.0;               ///< ladder placement (1 - tau_1) n ~= xi
  int k = 0;                     ///< 0: floor(7.5 n^(1/3))
  double threshold = kDefaultRegimeThreshold;
  BaseLevel base_level = BaseLevel::First;
  int grid_points = 401;
  int lambda_grid_size = 30;
  int threads = 1;
  std::string out_dir = ".";
  std::uint64_t seed = 20240229;

  void validate() const;
};

int exit_code(ErrorKind kind) noexcept;

/// Writes model.json and curve.csv into out_dir; summary lines go to `log`.
void cmd_fit(const RunConfig& config, std::ostream& log);

/// Writes evi_path.csv, evi_pointwise.csv, extreme_curve.csv and
/// tail_summary.json into out_dir.
void cmd_tail(const RunConfig& config, std::ostream& log);

/// Writes report.csv and replications.csv into out_dir and echoes the report.
void cmd_simulate(const StudyConfig& config, const std::string& out_dir, std::ostream& log);

/// One text line, then one JSON line.
void cmd_classify(double tau, std::int64_t n, double threshold, std::ostream& out);

/// Full command line: parses, dispatches, maps errors to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace xqr
