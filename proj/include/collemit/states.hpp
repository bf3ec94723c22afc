#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "collemit/geometry.hpp"
#include "collemit/types.hpp"

namespace collemit {

/// Local basis per site: g = 0, s_a = 1, s_b = 2.
enum class Level : int { G = 0, A = 1, B = 2 };

inline constexpr int kMaxDenseSites = 12;

/// One term (sigma_a,k_a^dagger)^n_a (sigma_b,k_b^dagger)^n_b / sqrt(n_a! n_b!) |0>.
struct CollectiveTerm {
  Complex amplitude{1.0, 0.0};
  int n_a = 0;
  int n_b = 0;
  Vec3 k_a = Vec3::Zero();
  Vec3 k_b = Vec3::Zero();
};

struct CollectiveSpec {
  std::vector<CollectiveTerm> terms;

  int size() const { return static_cast<int>(terms.size()); }
  int max_n_a() const;
  int max_n_b() const;
  void validate() const;
};

CollectiveSpec w_state_spec(const Vec3& k);
/// Two excitations in different species with momenta swapped between the
/// terms: (|k, q> + |q, k>) / sqrt 2.
CollectiveSpec two_spin_wave_spec(const Vec3& k, const Vec3& q);

/// Amplitudes over 3^n configurations, site 1 the most significant base-3 digit.
struct DenseState {
  int n_sites = 0;
  Eigen::VectorXcd amplitudes;
  /// Norm before explicit normalization (finite-N diagnostic).
  double raw_norm = 1.0;

  static DenseState vacuum(int n_sites);
  static DenseState basis(const std::vector<Level>& config);
  double norm() const { return amplitudes.norm(); }
};

std::size_t dense_dimension(int n_sites);
/// Level of `site` (0-based) in configuration `index`.
Level level_at(std::size_t index, int site, int n_sites);

DenseState build_collective_state(const CollectiveSpec& spec, const AtomGeometry& geom);

int schmidt_rank(const DenseState& state, int cut, double tolerance = 1e-10);
Eigen::VectorXd schmidt_values(const DenseState& state, int cut);

struct SchmidtReport {
  std::vector<std::pair<int, int>> cut_ranks;
  int max_rank = 1;
  double tolerance = 1e-10;
};

SchmidtReport schmidt_report(const DenseState& state, double tolerance = 1e-10);

int bond_dimension_bound(int m, int n_a, int n_b);
/// Bound for a spec, using the largest n_a and n_b over its terms.
int bond_dimension_bound(const CollectiveSpec& spec);

/// Left-canonical matrix product state, site tensors V^{i_j} for i_j in {g, s_a, s_b}.
struct Mps {
  std::vector<std::array<Eigen::MatrixXcd, 3>> sites;
  /// Bond dimensions between sites j and j+1.
  std::vector<int> bond_dims;

  int max_bond() const;
  Eigen::VectorXcd contract() const;
};

Mps mps_from_dense(const DenseState& state, double tolerance = 1e-10);

/// Width of the sequential-generation gates, floor(log2 D) + 1 qubits.
int gate_qubits(int bond_dim);

double fidelity(const DenseState& a, const DenseState& b);

}  // namespace collemit
