#include "collemit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "collemit/csv.hpp"
#include "collemit/errors.hpp"

namespace collemit {

void validate(const FluctuationModel& model) {
  if (const auto* t = std::get_if<ThermalFluctuation>(&model)) {
    if ((t->xi.array() < 0.0).any() || !t->xi.allFinite())
      throw InvalidArgument("thermal xi components must be >= 0");
  } else if (const auto* b = std::get_if<BoxDistribution>(&model)) {
    if ((b->size.array() <= 0.0).any() || !b->size.allFinite())
      throw InvalidArgument("box size components must be > 0");
  }
}

bool is_fixed(const FluctuationModel& model) {
  return std::holds_alternative<FixedPositions>(model);
}

AtomGeometry build_lattice(std::array<int, 3> dims, double d0) {
  for (int n : dims)
    if (n < 1) throw InvalidArgument("lattice dimensions must be >= 1");
  if (!(d0 > 0.0)) throw InvalidArgument("lattice spacing must be > 0");

  AtomGeometry geom;
  geom.dims = dims;
  geom.spacing = d0;
  geom.positions.reserve(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  const Vec3 centre((dims[0] - 1) / 2.0, (dims[1] - 1) / 2.0, (dims[2] - 1) / 2.0);
  for (int iz = 0; iz < dims[2]; ++iz)
    for (int iy = 0; iy < dims[1]; ++iy)
      for (int ix = 0; ix < dims[0]; ++ix)
        geom.positions.emplace_back(d0 * (ix - centre.x()), d0 * (iy - centre.y()),
                                    d0 * (iz - centre.z()));
  return geom;
}

AtomGeometry build_ring(int n, double spacing) {
  if (n < 1) throw InvalidArgument("ring needs at least one atom");
  if (!(spacing > 0.0)) throw InvalidArgument("ring spacing must be > 0");
  AtomGeometry geom;
  geom.dims = {n, 1, 1};
  if (n == 1) {
    geom.positions.push_back(Vec3::Zero());
    return geom;
  }
  const double radius = spacing / (2.0 * std::sin(kPi / n));
  for (int j = 0; j < n; ++j) {
    const double a = kTwoPi * j / n;
    geom.positions.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
  }
  return geom;
}

namespace {

Eigen::VectorXd coulomb_forces(const Eigen::VectorXd& u) {
  const auto n = u.size();
  Eigen::VectorXd f = -u;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = u[i] - u[j];
      f[i] += (d > 0 ? 1.0 : -1.0) / (d * d);
    }
  return f;
}

double coulomb_energy(const Eigen::VectorXd& u) {
  double e = 0.5 * u.squaredNorm();
  for (Eigen::Index i = 0; i < u.size(); ++i)
    for (Eigen::Index j = i + 1; j < u.size(); ++j) e += 1.0 / std::abs(u[i] - u[j]);
  return e;
}

bool strictly_ascending(const Eigen::VectorXd& u) {
  for (Eigen::Index i = 1; i < u.size(); ++i)
    if (!(u[i] > u[i - 1])) return false;
  return true;
}

}  // namespace

double coulomb_force_residual(const std::vector<double>& u) {
  const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(u.data(), u.size());
  return coulomb_forces(v).cwiseAbs().maxCoeff();
}

AtomGeometry solve_coulomb_chain(const TrapParams& params) {
  const int n = params.n_ions;
  if (n < 1) throw InvalidArgument("n_ions must be >= 1");
  if (!(params.tolerance > 0.0)) throw InvalidArgument("tolerance must be > 0");
  if (!(params.length_scale > 0.0)) throw InvalidArgument("length_scale must be > 0");

  // Uniform-density start: equal gaps d with the end ion balanced against
  // its neighbours, (N-1) d / 2 ~ (pi^2 / 6) / d^2.
  Eigen::VectorXd u(n);
  if (n == 1) {
    u[0] = 0.0;
  } else {
    const double d = std::cbrt(kPi * kPi / (3.0 * (n - 1)));
    for (int i = 0; i < n; ++i) u[i] = d * (i - (n - 1) / 2.0);
  }

  double residual = coulomb_forces(u).cwiseAbs().maxCoeff();
  int iter = 0;
  for (; iter < params.max_iterations && residual > params.tolerance; ++iter) {
    const Eigen::VectorXd f = coulomb_forces(u);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double c = 2.0 / std::pow(std::abs(u[i] - u[j]), 3);
        hess(i, i) += c;
        hess(i, j) -= c;
      }
    const Eigen::VectorXd step = hess.ldlt().solve(f);

    // Backtrack on the energy and keep the ordering intact.
    const double e0 = coulomb_energy(u);
    double t = 1.0;
    Eigen::VectorXd trial = u + step;
    while (t > 1e-12 && (!strictly_ascending(trial) || coulomb_energy(trial) > e0 + 1e-14 * std::abs(e0))) {
      t *= 0.5;
      trial = u + t * step;
    }
    u = trial;
    residual = coulomb_forces(u).cwiseAbs().maxCoeff();
  }
  if (residual > params.tolerance)
    throw ConvergenceFailure("Coulomb chain Newton iteration did not converge", residual);

  // Symmetrize away roundoff so u_i = -u_{N+1-i} exactly.
  for (int i = 0; i < n / 2; ++i) {
    const double m = 0.5 * (u[n - 1 - i] - u[i]);
    u[i] = -m;
    u[n - 1 - i] = m;
  }
  if (n % 2 == 1) u[n / 2] = 0.0;

  AtomGeometry geom;
  geom.dims = {n, 1, 1};
  geom.positions.reserve(n);
  for (int i = 0; i < n; ++i) geom.positions.emplace_back(params.length_scale * u[i], 0.0, 0.0);
  return geom;
}

namespace {

// Unit direction of a chain, or nullopt if the atoms are not collinear.
std::optional<Vec3> chain_axis(const AtomGeometry& geom) {
  const auto& p = geom.positions;
  Vec3 axis = p.back() - p.front();
  const double len = axis.norm();
  if (len == 0.0) return std::nullopt;
  axis /= len;
  for (const auto& r : p) {
    const Vec3 d = r - p.front();
    if ((d - d.dot(axis) * axis).norm() > 1e-9 * len) return std::nullopt;
  }
  return axis;
}

}  // namespace

double average_spacing(const AtomGeometry& geom) {
  if (geom.size() < 2) throw InvalidArgument("average spacing needs at least two atoms");
  if (geom.spacing) return *geom.spacing;
  const auto axis = chain_axis(geom);
  if (!axis) throw InvalidArgument("average spacing is defined for chains or declared lattices");
  std::vector<double> s;
  s.reserve(geom.size());
  for (const auto& r : geom.positions) s.push_back(r.dot(*axis));
  std::sort(s.begin(), s.end());
  return (s.back() - s.front()) / static_cast<double>(s.size() - 1);
}

AtomGeometry rescale_to_spacing(const AtomGeometry& geom, double mean_spacing) {
  if (!(mean_spacing > 0.0)) throw InvalidArgument("mean spacing must be > 0");
  const double factor = mean_spacing / average_spacing(geom);
  AtomGeometry out = geom;
  for (auto& r : out.positions) r *= factor;
  if (out.spacing) out.spacing = mean_spacing;
  return out;
}

AtomGeometry translated(const AtomGeometry& geom, const Vec3& shift) {
  AtomGeometry out = geom;
  for (auto& r : out.positions) r += shift;
  return out;
}

double min_pairwise_distance(const AtomGeometry& geom) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < geom.size(); ++i)
    for (std::size_t j = i + 1; j < geom.size(); ++j)
      best = std::min(best, (geom.positions[i] - geom.positions[j]).norm());
  return best;
}

PositionSampler::PositionSampler(const AtomGeometry& geom, FluctuationModel model,
                                 std::uint64_t seed)
    : geom_(geom), model_(std::move(model)), seed_(seed) {
  validate(model_);
}

void PositionSampler::sample(std::uint64_t index, std::vector<Vec3>& out) const {
  out.resize(geom_.size());
  if (std::holds_alternative<FixedPositions>(model_)) {
    std::copy(geom_.positions.begin(), geom_.positions.end(), out.begin());
    return;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);

  if (const auto* t = std::get_if<ThermalFluctuation>(&model_)) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t j = 0; j < geom_.size(); ++j)
      for (int a = 0; a < 3; ++a) out[j][a] = geom_.positions[j][a] + t->xi[a] * gauss(rng);
  } else {
    const auto& box = std::get<BoxDistribution>(model_);
    std::uniform_real_distribution<double> uni(-0.5, 0.5);
    for (std::size_t j = 0; j < geom_.size(); ++j)
      for (int a = 0; a < 3; ++a) out[j][a] = box.size[a] * uni(rng);
  }
}

std::vector<std::vector<Vec3>> sample_positions(const AtomGeometry& geom,
                                                const FluctuationModel& model,
                                                std::uint64_t seed, std::size_t n_samples) {
  if (n_samples < 1) throw InvalidArgument("n_samples must be >= 1");
  PositionSampler sampler(geom, model, seed);
  std::vector<std::vector<Vec3>> out(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) sampler.sample(s, out[s]);
  return out;
}

void write_geometry(std::ostream& os, const AtomGeometry& geom) {
  os << "# x y z\n";
  for (const auto& r : geom.positions)
    os << format_double(r[0]) << ' ' << format_double(r[1]) << ' ' << format_double(r[2]) << '\n';
}

AtomGeometry read_geometry(std::istream& is) {
  AtomGeometry geom;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Vec3 r;
    if (!(ls >> r[0] >> r[1] >> r[2]))
      throw InvalidArgument("geometry line " + std::to_string(lineno) + ": expected three numbers");
    std::string rest;
    if (ls >> rest)
      throw InvalidArgument("geometry line " + std::to_string(lineno) + ": trailing data");
    geom.positions.push_back(r);
  }
  geom.dims = {static_cast<int>(geom.size()), 1, 1};
  return geom;
}

}  // namespace collemit
