#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "collemit/emission.hpp"
#include "collemit/geometry.hpp"
#include "collemit/quadrature.hpp"
#include "collemit/types.hpp"

namespace collemit {

enum class KernelForm { Scalar, Vector };

/// Pairwise decay rates Gamma_ij and coherent couplings G_ij of the
/// single-excitation master equation, in units of the single-atom rate.
struct DecayKernel {
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd shift;
  KernelForm form = KernelForm::Scalar;

  Eigen::Index size() const { return gamma.rows(); }
  /// Non-Hermitian generator M = Gamma - i G.
  Eigen::MatrixXcd generator() const;
};

/// Scalar form: Gamma sinc(k r_ij). Vector form: the radiating dipole kernel
/// for orientation n_eg, including near-field terms. The shift is zero
/// unless `include_shift` is set, and only the vector form carries one.
DecayKernel gamma_kernel(const AtomGeometry& geom, const EmissionConfig& cfg,
                         KernelForm form = KernelForm::Scalar, bool include_shift = false);

void write_kernel(std::ostream& os, const DecayKernel& kernel);

/// Normalized single-excitation amplitude vector psi_j.
struct SpinWave {
  Eigen::VectorXcd amplitudes;

  /// psi_j = exp(-i k . r_j) / sqrt(N).
  static SpinWave plane(const AtomGeometry& geom, const Vec3& k);
  /// psi_j = exp(-i 2 pi m j / N) / sqrt(N), momentum m along a ring.
  static SpinWave ring_mode(int n, int m);

  Eigen::Index size() const { return amplitudes.size(); }
  Eigen::MatrixXcd projector() const { return amplitudes * amplitudes.adjoint(); }
};

/// (1/N) sum_ij Gamma_ij exp(i k . (r_i - r_j)).
double collective_rate(const DecayKernel& kernel, const Vec3& k, const AtomGeometry& geom);
/// psi^dagger Gamma psi.
double collective_rate(const DecayKernel& kernel, const SpinWave& wave);

/// (p_k0, p_vacuum) of the two-state reduction.
std::pair<double, double> evolve_closed(double gamma_k0, double t);

/// Density matrix restricted to vacuum plus one excitation.
struct SingleExcitationState {
  Eigen::MatrixXcd coherences;
  double vacuum_pop = 0.0;

  static SingleExcitationState pure(const SpinWave& wave);
  double trace() const { return coherences.trace().real() + vacuum_pop; }
  /// Throws InvalidArgument if the trace or Hermiticity checks fail.
  void validate(double tol = 1e-10) const;
};

/// Exact propagation rho(t) = exp(-M t / 2) rho0 exp(-M^dagger t / 2), the
/// vacuum absorbing the lost trace. `t_grid` must be ascending and >= 0.
std::vector<SingleExcitationState> master_solve(const DecayKernel& kernel,
                                                const SingleExcitationState& initial,
                                                std::span<const double> t_grid);

/// Frobenius norm of rho minus its projection onto |psi><psi|.
double leakage_norm(const SingleExcitationState& state, const SpinWave& wave);

struct TrajectoryPoint {
  double t;
  double p_k0;
  double p_vacuum;
  double leakage_norm;
};

std::vector<TrajectoryPoint> trajectory(const DecayKernel& kernel, const SpinWave& wave,
                                        std::span<const double> t_grid);

/// Closed-form two-time correlator <sigma_i^dagger(tau1) sigma_j(tau2)>
/// = exp(-Gamma_k0 (tau1 + tau2) / 2) exp(i k0 . (r_i - r_j)) / N.
Eigen::MatrixXcd two_time_correlator(double gamma_k0, const Vec3& k0, const AtomGeometry& geom,
                                     double tau1, double tau2);
Eigen::MatrixXcd two_time_correlator(double gamma_k0, const SpinWave& wave, double tau1,
                                     double tau2);

/// The same correlator from the propagated amplitudes (regression theorem
/// restricted to one excitation): [exp(-M tau2/2) rho0 exp(-M^dagger tau1/2)]_ji.
Eigen::MatrixXcd regression_correlator(const DecayKernel& kernel, const SpinWave& wave,
                                       double tau1, double tau2);

/// Emitted one-photon angular distribution for the read-out spin wave
/// (momentum k_L + k0), using the exponential correlator. Equals
/// dipole factor x f(n) x Gamma / Gamma_eff, so it integrates to one for
/// the scalar kernel.
std::vector<double> photon_distribution_numeric(const DecayKernel& kernel,
                                                const EmissionConfig& cfg,
                                                const AtomGeometry& geom,
                                                const AngularGrid& grid);

/// Same distribution with the time integral of the full single-excitation
/// dynamics (Lyapunov solution) in place of the exponential correlator.
std::vector<double> photon_distribution_exact(const DecayKernel& kernel,
                                              const EmissionConfig& cfg,
                                              const AtomGeometry& geom,
                                              const AngularGrid& grid);

}  // namespace collemit
