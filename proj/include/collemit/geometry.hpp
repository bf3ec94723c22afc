#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

#include "collemit/types.hpp"

namespace collemit {

/// Equilibrium atom positions r0_j. Lengths are in units of the optical
/// wavelength unless a builder says otherwise.
struct AtomGeometry {
  std::vector<Vec3> positions;
  /// (Nx, Ny, Nz) for lattices, (N, 1, 1) for chains.
  std::array<int, 3> dims{0, 0, 0};
  /// Declared lattice spacing; absent for irregular arrangements.
  std::optional<double> spacing;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
};

struct FixedPositions {};

/// Independent Gaussian displacement of each atom, standard deviation xi per axis.
struct ThermalFluctuation {
  Vec3 xi = Vec3::Zero();
};

/// Atoms uniformly distributed in an axis-aligned box centred at the origin.
struct BoxDistribution {
  Vec3 size = Vec3::Ones();
};

using FluctuationModel = std::variant<FixedPositions, ThermalFluctuation, BoxDistribution>;

void validate(const FluctuationModel& model);
bool is_fixed(const FluctuationModel& model);

struct TrapParams {
  int n_ions = 1;
  double tolerance = 1e-10;
  /// Physical length of one dimensionless Coulomb unit.
  double length_scale = 1.0;
  int max_iterations = 500;
};

AtomGeometry build_lattice(std::array<int, 3> dims, double d0);
inline AtomGeometry build_chain(int n, double d0) { return build_lattice({n, 1, 1}, d0); }

/// N atoms on a circle in the xy-plane with nearest-neighbour chord `spacing`.
AtomGeometry build_ring(int n, double spacing);

/// Equilibrium of N ions in a harmonic trap along x, in units of
/// length_scale. Positions are sorted ascending.
AtomGeometry solve_coulomb_chain(const TrapParams& params);

/// Force residual max-norm of the dimensionless chain potential
/// sum u_i^2/2 + sum_{i<j} 1/|u_i - u_j|.
double coulomb_force_residual(const std::vector<double>& u);

/// Mean nearest-neighbour distance along a chain, or the declared lattice spacing.
double average_spacing(const AtomGeometry& geom);

/// Uniformly rescales positions so that average_spacing equals `mean_spacing`.
AtomGeometry rescale_to_spacing(const AtomGeometry& geom, double mean_spacing);

AtomGeometry translated(const AtomGeometry& geom, const Vec3& shift);

double min_pairwise_distance(const AtomGeometry& geom);

/// Draws position configurations for a fluctuation model. Sample `index`
/// uses its own generator seeded from (seed, index), so samples can be
/// produced in any order or in parallel with identical results.
class PositionSampler {
 public:
  PositionSampler(const AtomGeometry& geom, FluctuationModel model, std::uint64_t seed);

  void sample(std::uint64_t index, std::vector<Vec3>& out) const;
  const AtomGeometry& geometry() const { return geom_; }
  const FluctuationModel& model() const { return model_; }

 private:
  AtomGeometry geom_;
  FluctuationModel model_;
  std::uint64_t seed_;
};

std::vector<std::vector<Vec3>> sample_positions(const AtomGeometry& geom,
                                                const FluctuationModel& model,
                                                std::uint64_t seed, std::size_t n_samples);

/// Plain-text table: one atom per line, x y z, '#' comments.
void write_geometry(std::ostream& os, const AtomGeometry& geom);
AtomGeometry read_geometry(std::istream& is);

}  // namespace collemit
