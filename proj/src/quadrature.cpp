#include "collemit/quadrature.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "collemit/errors.hpp"

namespace collemit {

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  if (n < 1) throw InvalidArgument("Gauss-Legendre order must be >= 1");
  std::vector<double> x(n), w(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      dp = n * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p1 = 1.0, p2 = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double p3 = p2;
      p2 = p1;
      p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
    }
    dp = n * (z * p1 - p2) / (z * z - 1.0);
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
  return {x, w};
}

Frame Frame::around(const Vec3& axis) {
  Frame f;
  f.axis = axis.normalized();
  int best = 0;
  for (int a = 1; a < 3; ++a)
    if (std::abs(f.axis[a]) < std::abs(f.axis[best]) - 1e-12) best = a;
  const Vec3 ref = Vec3::Unit(best);
  f.e1 = (ref - ref.dot(f.axis) * f.axis).normalized();
  f.e2 = f.axis.cross(f.e1);
  return f;
}

Vec3 Frame::direction(double theta, double phi) const {
  const double s = std::sin(theta);
  return s * std::cos(phi) * e1 + s * std::sin(phi) * e2 + std::cos(theta) * axis;
}

AngularGrid AngularGrid::gauss_legendre(int n_theta, int n_phi, const Vec3& axis) {
  if (n_theta < 1 || n_phi < 1) throw InvalidArgument("angular grid sizes must be >= 1");
  if (!(axis.norm() > 0.0)) throw InvalidArgument("grid axis must be nonzero");
  AngularGrid g;
  g.frame = Frame::around(axis);
  const auto [u, wu] = collemit::gauss_legendre(n_theta);
  const double dphi = kTwoPi / n_phi;
  const std::size_t total = static_cast<std::size_t>(n_theta) * n_phi;
  g.nodes.reserve(total);
  g.theta.reserve(total);
  g.phi.reserve(total);
  g.weights.reserve(total);
  for (int i = 0; i < n_theta; ++i) {
    const double theta = std::acos(u[i]);
    for (int j = 0; j < n_phi; ++j) {
      const double phi = dphi * j;
      g.nodes.push_back(g.frame.direction(theta, phi));
      g.theta.push_back(theta);
      g.phi.push_back(phi);
      g.weights.push_back(wu[i] * dphi);
    }
  }
  return g;
}

double AngularGrid::integrate(std::span<const double> values) const {
  if (values.size() != weights.size()) throw InvalidArgument("value count does not match grid");
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * values[i];
  return s;
}

}  // namespace collemit
