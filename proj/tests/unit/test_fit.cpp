#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "collemit/errors.hpp"
#include "collemit/fit.hpp"

using namespace collemit;

TEST_CASE("exact power law is recovered") {
  const std::vector<double> x{2, 4, 8, 16, 32};
  std::vector<double> y;
  for (double v : x) y.push_back(3.5 * std::pow(v, -0.5));
  for (bool ex : {false, true}) {
    const auto f = fit_power_law(x, y, ex);
    CHECK(f.exponent == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(f.prefactor == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(f.exponent_stderr < 1e-10);
    CHECK(f.n_points == (ex ? 4 : 5));
  }
}

TEST_CASE("excluding the smallest x drops the outlier") {
  const std::vector<double> x{50, 1, 10, 100};
  const std::vector<double> y{std::pow(50, -1.0), 5.0, 0.1, 0.01};
  const auto f = fit_power_law(x, y, true);
  CHECK(f.exponent == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("noisy data gives a sensible standard error") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<double> x, y;
  for (int i = 1; i <= 40; ++i) {
    x.push_back(i);
    y.push_back(std::pow(i, -1.0 / 3.0) * std::exp(noise(rng)));
  }
  const auto f = fit_power_law(x, y, false);
  CHECK(f.exponent_stderr > 0.0);
  CHECK(std::abs(f.exponent + 1.0 / 3.0) < 4.0 * f.exponent_stderr);
}

TEST_CASE("too few points or bad values") {
  const std::vector<double> two{1, 2}, y2{1, 2};
  CHECK_THROWS_AS(fit_power_law(two, y2), InvalidArgument);
  const std::vector<double> three{1, 2, 4}, y3{1, 0.5, 0.25};
  const auto f = fit_power_law(three, y3, true);
  CHECK(std::isnan(f.exponent_stderr));
  CHECK(f.exponent == doctest::Approx(-1.0));
  const std::vector<double> yneg{1, -1, 2};
  CHECK_THROWS_AS(fit_power_law(three, yneg, false), InvalidArgument);
  const std::vector<double> ymis{1, 2};
  CHECK_THROWS_AS(fit_power_law(three, ymis, false), InvalidArgument);
}
