/**
 * @file io.hpp
 * @brief CSV ingestion of (x, y) columns and the JSON model file.
 *
 * CSV dialect: comma separated, header row first, '.' as decimal point.
 * Cells that are empty, "NA" or "NaN" mark a missing value; rows missing x
 * or y are dropped and counted. Anything else that does not parse as a
 * number is a Data error naming the line.
 */
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "xqr/model.hpp"

namespace xqr {

struct XYData {
  std::vector<double> x;
  std::vector<double> y;
  std::size_t rows = 0;     ///< data rows read, excluding the header
  std::size_t dropped = 0;  ///< rows with a missing x or y
};

XYData parse_xy_csv(std::istream& in, const std::string& x_col, const std::string& y_col,
                    const std::string& source = "<input>");

/// Io error if the file cannot be opened.
XYData read_xy_csv(const std::string& path, const std::string& x_col, const std::string& y_col);

inline constexpr int kModelSchemaVersion = 1;

/// Model file: schema_version, basis (lower, upper, degree, interior, knots),
/// penalty_order, tau, lambda, coefficients, diagnostics. Doubles are
/// written with 17 significant digits so a reload predicts identically.
std::string model_to_json(const QuantileFitModel& model);
QuantileFitModel model_from_json(const std::string& text);

void save_model(const QuantileFitModel& model, const std::string& path);
QuantileFitModel load_model(const std::string& path);

/// "%.12g"; NaN as "nan", infinities as "inf" / "-inf".
std::string format_number(double v);

}  // namespace xqr
