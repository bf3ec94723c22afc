#pragma once

#include <span>

namespace collemit {

/// y ~ prefactor * x^exponent, ordinary least squares on (log x, log y).
struct PowerLawFit {
  double exponent = 0.0;
  /// Standard error of the exponent; NaN with only two points.
  double exponent_stderr = 0.0;
  double prefactor = 0.0;
  int n_points = 0;
};

/// Fits all points, or all but the one with the smallest x when
/// `exclude_smallest` is set. Needs at least three sweep values.
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y,
                          bool exclude_smallest = true);

}  // namespace collemit
