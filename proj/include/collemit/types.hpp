#pragma once

#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <numbers>

namespace collemit {

using Vec3 = Eigen::Vector3d;
using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// sin(x)/x with the removable singularity at 0.
inline double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

}  // namespace collemit
