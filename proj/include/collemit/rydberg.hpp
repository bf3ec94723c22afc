#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "collemit/geometry.hpp"
#include "collemit/states.hpp"
#include "collemit/types.hpp"

namespace collemit {

inline constexpr int kMaxRydbergSites = 8;

/// Two lasers driving g -> s_a (omega1, detuning +delta) and g -> s_b
/// (omega2, detuning -delta); constant blockade u between atoms in the same
/// excited species, none across species. Rates are in units of delta unless
/// the caller picks otherwise.
struct RydbergParams {
  double omega1 = 0.05;
  double omega2 = 0.05;
  double delta = 1.0;
  double u_blockade = 0.0;
  Vec3 k1 = Vec3::Zero();
  Vec3 k2 = Vec3::Zero();
  /// Pairs that interact; all pairs when absent.
  std::optional<Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>> pair_mask;

  void validate() const;
  /// |omega| < |delta| for both lasers and effective Rabi well below u.
  bool perturbative() const;
};

double effective_rabi(double omega1, double omega2, double delta);

/// Static rotating-frame Hamiltonian on the 3^N configuration space.
class RydbergHamiltonian {
 public:
  RydbergHamiltonian(const RydbergParams& params, const AtomGeometry& geom);

  int n_sites() const { return n_; }
  const Eigen::SparseMatrix<Complex>& matrix() const { return h_; }
  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const { return h_ * v; }

 private:
  int n_;
  Eigen::SparseMatrix<Complex> h_;
};

RydbergHamiltonian build_rydberg_hamiltonian(const RydbergParams& params, const AtomGeometry& geom);

/// exp(-i H dt) v by Lanczos iteration; the basis grows until the
/// a-posteriori error estimate drops below `tol` (max `max_krylov` vectors).
Eigen::VectorXcd krylov_expmv(const Eigen::SparseMatrix<Complex>& h, const Eigen::VectorXcd& v,
                              double dt, double tol = 1e-13, int max_krylov = 60);

/// Momenta of the two excitation channels of the target superposition.
struct TargetChannels {
  Vec3 k_a1, k_b1, k_a2, k_b2;
  /// Defaults: channel 1 (k_a, k_b) = (k1, k2), channel 2 swapped.
  static TargetChannels from(const RydbergParams& params);
};

struct PreparationOptions {
  std::optional<TargetChannels> target;
  int n_phase = 360;
  /// Richardson check every this many steps.
  int check_every = 50;
  /// Store every this many states in the trajectory, 0 for none.
  int record_stride = 0;
};

struct PreparationSample {
  double t;
  double fidelity;
  double double_same_species;
  double norm_error;
};

struct PreparationResult {
  std::vector<PreparationSample> samples;
  std::vector<std::pair<double, DenseState>> trajectory;
  double double_same_species_max = 0.0;
  double mixed_pair_max = 0.0;
  double target_fidelity = 0.0;
  double best_time = 0.0;
  double best_phase = 0.0;
  double effective_rabi = 0.0;
  double max_step_error = 0.0;
  double max_norm_error = 0.0;
};

/// Population of configurations with at least two atoms in the same excited species.
double double_same_species_population(const Eigen::VectorXcd& psi, int n_sites);
/// Population of configurations with exactly one s_a and one s_b.
double mixed_pair_population(const Eigen::VectorXcd& psi, int n_sites);

PreparationResult simulate_preparation(const RydbergParams& params, const AtomGeometry& geom,
                                       double t_final, double dt,
                                       const PreparationOptions& options = {});

}  // namespace collemit
