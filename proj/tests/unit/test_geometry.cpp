#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "collemit/errors.hpp"
#include "collemit/geometry.hpp"

using namespace collemit;

namespace {

// Independent force evaluation for the dimensionless trap potential.
double max_force(const std::vector<double>& u) {
  double worst = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double f = -u[i];
    for (std::size_t j = 0; j < u.size(); ++j) {
      if (j == i) continue;
      const double d = u[i] - u[j];
      f += (d > 0 ? 1.0 : -1.0) / (d * d);
    }
    worst = std::max(worst, std::abs(f));
  }
  return worst;
}

std::vector<double> xs(const AtomGeometry& g) {
  std::vector<double> out;
  for (const auto& r : g.positions) out.push_back(r.x());
  return out;
}

}  // namespace

TEST_CASE("lattice is centred with the requested spacing") {
  const auto g = build_lattice({2, 1, 1}, 0.5);
  REQUIRE(g.size() == 2);
  CHECK(g.positions[0].x() == doctest::Approx(-0.25));
  CHECK(g.positions[1].x() == doctest::Approx(0.25));

  const auto single = build_lattice({1, 1, 1}, 0.3);
  CHECK(single.positions[0].norm() == 0.0);

  const auto cube = build_lattice({3, 3, 3}, 0.2);
  CHECK(cube.size() == 27);
  Vec3 mean = Vec3::Zero();
  for (const auto& r : cube.positions) mean += r;
  CHECK(mean.norm() < 1e-12);
  CHECK(min_pairwise_distance(cube) == doctest::Approx(0.2));
  CHECK(average_spacing(cube) == doctest::Approx(0.2));
}

TEST_CASE("lattice rejects bad input") {
  CHECK_THROWS_AS(build_lattice({0, 1, 1}, 0.5), InvalidArgument);
  CHECK_THROWS_AS(build_lattice({2, 1, 1}, 0.0), InvalidArgument);
  CHECK_THROWS_AS(build_lattice({2, 1, 1}, -1.0), InvalidArgument);
}

TEST_CASE("ring chord equals spacing") {
  const auto g = build_ring(12, 0.3);
  REQUIRE(g.size() == 12);
  for (int j = 0; j < 12; ++j)
    CHECK((g.positions[j] - g.positions[(j + 1) % 12]).norm() == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("coulomb chain small N against closed forms") {
  TrapParams p;
  p.n_ions = 1;
  auto g = solve_coulomb_chain(p);
  REQUIRE(g.size() == 1);
  CHECK(std::abs(g.positions[0].x()) < 1e-12);

  // N=2: u^3 = 1/4. N=3: outer ions at (5/4)^{1/3}.
  p.n_ions = 2;
  g = solve_coulomb_chain(p);
  CHECK(g.positions[1].x() == doctest::Approx(std::cbrt(0.25)).epsilon(1e-9));
  CHECK(g.positions[0].x() == doctest::Approx(-std::cbrt(0.25)).epsilon(1e-9));

  p.n_ions = 3;
  g = solve_coulomb_chain(p);
  CHECK(std::abs(g.positions[1].x()) < 1e-9);
  CHECK(g.positions[2].x() == doctest::Approx(std::cbrt(1.25)).epsilon(1e-9));

  p.n_ions = 2;
  p.length_scale = 3.0;
  g = solve_coulomb_chain(p);
  CHECK(g.positions[1].x() == doctest::Approx(3.0 * std::cbrt(0.25)).epsilon(1e-9));
}

TEST_CASE("coulomb chain properties") {
  for (int n = 2; n <= 50; n += (n < 10 ? 1 : 8)) {
    CAPTURE(n);
    TrapParams p;
    p.n_ions = n;
    const auto g = solve_coulomb_chain(p);
    const auto u = xs(g);
    REQUIRE(std::is_sorted(u.begin(), u.end()));
    CHECK(max_force(u) <= 1e-9);
    CHECK(coulomb_force_residual(u) <= 1e-9);
    for (int j = 0; j < n; ++j) CHECK(std::abs(u[j] + u[n - 1 - j]) < 1e-9);
    if (n >= 3) {
      std::vector<double> gaps;
      for (int j = 0; j + 1 < n; ++j) gaps.push_back(u[j + 1] - u[j]);
      const auto mn = std::min_element(gaps.begin(), gaps.end()) - gaps.begin();
      const auto mx = std::max_element(gaps.begin(), gaps.end()) - gaps.begin();
      // Smallest gap in the middle, largest at the ends.
      CHECK(std::abs(2.0 * mn - (n - 2)) <= 1.0);
      CHECK((mx == 0 || mx == n - 2));
    }
  }
}

TEST_CASE("coulomb chain reports failure to converge") {
  TrapParams p;
  p.n_ions = 20;
  p.tolerance = 1e-30;
  p.max_iterations = 5;
  CHECK_THROWS_AS(solve_coulomb_chain(p), ConvergenceFailure);
  p.n_ions = 0;
  CHECK_THROWS_AS(solve_coulomb_chain(p), InvalidArgument);
}

TEST_CASE("average spacing and rescaling") {
  CHECK(average_spacing(build_chain(10, 0.7)) == doctest::Approx(0.7));
  TrapParams p;
  p.n_ions = 30;
  const auto g = rescale_to_spacing(solve_coulomb_chain(p), 0.4);
  CHECK(average_spacing(g) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK_THROWS_AS(average_spacing(build_chain(1, 0.5)), InvalidArgument);
}

TEST_CASE("fixed and zero-width samples reproduce the equilibrium") {
  const auto g = build_chain(5, 0.3);
  for (const FluctuationModel& m : {FluctuationModel{FixedPositions{}},
                                   FluctuationModel{ThermalFluctuation{Vec3::Zero()}}}) {
    const auto s = sample_positions(g, m, 7, 3);
    for (const auto& conf : s)
      for (std::size_t j = 0; j < g.size(); ++j) CHECK(conf[j] == g.positions[j]);
  }
}

TEST_CASE("sampling is deterministic and order independent") {
  const auto g = build_chain(4, 0.3);
  const FluctuationModel m = ThermalFluctuation{Vec3(0.1, 0.05, 0.0)};
  const auto a = sample_positions(g, m, 99, 10);
  const auto b = sample_positions(g, m, 99, 10);
  CHECK(a == b);
  PositionSampler sampler(g, m, 99);
  std::vector<Vec3> one;
  sampler.sample(7, one);
  CHECK(one == a[7]);
  const auto c = sample_positions(g, m, 100, 10);
  CHECK(c != a);
}

TEST_CASE("thermal and box sample moments") {
  const int n = 100000;
  const auto g = build_chain(1, 1.0);

  const Vec3 xi(0.2, 0.1, 0.05);
  const auto t = sample_positions(g, ThermalFluctuation{xi}, 3, n);
  const Vec3 box(1.0, 2.0, 0.5);
  const auto b = sample_positions(g, BoxDistribution{box}, 4, n);
  for (int a = 0; a < 3; ++a) {
    double m = 0, v = 0, mb = 0, vb = 0, lo = 1e9, hi = -1e9;
    for (int s = 0; s < n; ++s) {
      const double x = t[s][0][a];
      m += x;
      v += x * x;
      const double y = b[s][0][a];
      mb += y;
      vb += y * y;
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    m /= n;
    v = v / n - m * m;
    mb /= n;
    vb = vb / n - mb * mb;
    const double s2 = xi[a] * xi[a];
    CHECK(std::abs(m) < 4.0 * xi[a] / std::sqrt(n));
    CHECK(std::abs(v - s2) < 4.0 * s2 * std::sqrt(2.0 / n));

    const double l = box[a], var = l * l / 12.0;
    const double var_sd = std::sqrt((std::pow(l, 4) / 80.0 - var * var) / n);
    CHECK(std::abs(mb) < 4.0 * std::sqrt(var / n));
    CHECK(std::abs(vb - var) < 4.0 * var_sd);
    CHECK(lo >= -l / 2);
    CHECK(hi <= l / 2);
  }
}

TEST_CASE("translation and distances") {
  const auto g = build_chain(3, 0.5);
  const auto h = translated(g, Vec3(1, 2, 3));
  CHECK((h.positions[0] - g.positions[0] - Vec3(1, 2, 3)).norm() < 1e-15);
  CHECK(min_pairwise_distance(h) == doctest::Approx(0.5));
}

TEST_CASE("geometry round-trips through text") {
  const auto g = build_lattice({2, 2, 1}, 0.37);
  std::stringstream ss;
  write_geometry(ss, g);
  const auto back = read_geometry(ss);
  REQUIRE(back.size() == g.size());
  for (std::size_t j = 0; j < g.size(); ++j) CHECK((back.positions[j] - g.positions[j]).norm() < 1e-14);

  std::stringstream bad("# header\n0 0 0\n1 two 3\n");
  CHECK_THROWS_AS(read_geometry(bad), InvalidArgument);
}

TEST_CASE("fluctuation validation") {
  CHECK_THROWS_AS(validate(FluctuationModel{ThermalFluctuation{Vec3(-0.1, 0, 0)}}), InvalidArgument);
  CHECK_THROWS_AS(validate(FluctuationModel{BoxDistribution{Vec3(1, 0, 1)}}), InvalidArgument);
  CHECK(is_fixed(FixedPositions{}));
  CHECK_FALSE(is_fixed(ThermalFluctuation{}));
}
