#pragma once

#include <span>
#include <utility>
#include <vector>

#include "collemit/types.hpp"

namespace collemit {

/// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n);

/// Right-handed orthonormal frame (e1, e2, axis) with a deterministic choice of e1.
struct Frame {
  Vec3 e1, e2, axis;
  static Frame around(const Vec3& axis);
  Vec3 direction(double theta, double phi) const;
};

/// Product quadrature on the unit sphere: Gauss-Legendre in cos(theta)
/// times uniform nodes in phi, with theta measured from `frame.axis`.
struct AngularGrid {
  Frame frame;
  std::vector<Vec3> nodes;
  std::vector<double> theta;
  std::vector<double> phi;
  std::vector<double> weights;

  static AngularGrid gauss_legendre(int n_theta, int n_phi, const Vec3& axis = Vec3::UnitZ());

  std::size_t size() const { return nodes.size(); }
  double integrate(std::span<const double> values) const;
};

}  // namespace collemit
