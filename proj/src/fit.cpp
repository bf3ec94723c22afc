#include "collemit/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "collemit/errors.hpp"

namespace collemit {

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y,
                          bool exclude_smallest) {
  if (x.size() != y.size()) throw InvalidArgument("fit inputs differ in length");
  if (x.size() < 3) throw InvalidArgument("power-law fit needs at least three values");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("power-law fit needs positive data");

  std::size_t skip = x.size();
  if (exclude_smallest)
    skip = static_cast<std::size_t>(std::min_element(x.begin(), x.end()) - x.begin());

  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i == skip) continue;
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("power-law fit needs distinct x values");

  PowerLawFit f;
  f.n_points = static_cast<int>(lx.size());
  f.exponent = sxy / sxx;
  const double intercept = my - f.exponent * mx;
  f.prefactor = std::exp(intercept);
  if (lx.size() > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      const double r = ly[i] - intercept - f.exponent * lx[i];
      ssr += r * r;
    }
    f.exponent_stderr = std::sqrt(ssr / (n - 2.0) / sxx);
  } else {
    f.exponent_stderr = std::numeric_limits<double>::quiet_NaN();
  }
  return f;
}

}  // namespace collemit
