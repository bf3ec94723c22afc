#include "collemit/dynamics.hpp"

#include <cmath>
#include <ostream>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "collemit/csv.hpp"
#include "collemit/errors.hpp"

namespace collemit {

Eigen::MatrixXcd DecayKernel::generator() const {
  return gamma.cast<Complex>() - Complex(0.0, 1.0) * shift.cast<Complex>();
}

namespace {

// cos x / x^2 - sin x / x^3, which cancels to -1/3 at small x.
double near_field(double x) {
  if (x < 1e-2) {
    const double x2 = x * x;
    return -1.0 / 3.0 + x2 / 30.0 - x2 * x2 / 840.0;
  }
  return std::cos(x) / (x * x) - std::sin(x) / (x * x * x);
}

double dipole_factor(KernelForm form, const Vec3& dipole, const Vec3& n) {
  if (form == KernelForm::Scalar) return 1.0 / (4.0 * kPi);
  const double c = dipole.dot(n);
  return 3.0 / (8.0 * kPi) * (1.0 - c * c);
}

void check_sizes(const DecayKernel& kernel, Eigen::Index n) {
  if (kernel.size() != n) throw InvalidArgument("kernel and state sizes differ");
}

}  // namespace

DecayKernel gamma_kernel(const AtomGeometry& geom, const EmissionConfig& cfg, KernelForm form,
                         bool include_shift) {
  if (geom.empty()) throw InvalidArgument("geometry has no atoms");
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(geom.size());
  const double k = cfg.wavenumber();
  DecayKernel K;
  K.form = form;
  K.gamma = Eigen::MatrixXd::Zero(n, n);
  K.shift = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K.gamma(i, i) = cfg.gamma;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Vec3 d = geom.positions[i] - geom.positions[j];
      const double r = d.norm();
      if (!(r > 0.0)) throw InvalidArgument("coincident atoms in decay kernel");
      const double x = k * r;
      double g = 0.0, s = 0.0;
      if (form == KernelForm::Scalar) {
        g = cfg.gamma * sinc(x);
      } else {
        const double c = cfg.dipole.dot(d) / r;
        const double t = 1.0 - c * c, l = 1.0 - 3.0 * c * c;
        g = 1.5 * cfg.gamma * (t * sinc(x) + l * near_field(x));
        if (include_shift) {
          const double omega = 0.75 * cfg.gamma *
                               (-t * std::cos(x) / x +
                                l * (std::sin(x) / (x * x) + std::cos(x) / (x * x * x)));
          s = -2.0 * omega;
        }
      }
      K.gamma(i, j) = K.gamma(j, i) = g;
      K.shift(i, j) = K.shift(j, i) = s;
    }
  }
  return K;
}

void write_kernel(std::ostream& os, const DecayKernel& kernel) {
  os << "# gamma_ij, " << kernel.size() << " x " << kernel.size() << '\n';
  for (Eigen::Index i = 0; i < kernel.size(); ++i) {
    for (Eigen::Index j = 0; j < kernel.size(); ++j)
      os << (j ? " " : "") << format_double(kernel.gamma(i, j));
    os << '\n';
  }
  if (kernel.shift.cwiseAbs().maxCoeff() > 0.0) {
    os << "# shift G_ij\n";
    for (Eigen::Index i = 0; i < kernel.size(); ++i) {
      for (Eigen::Index j = 0; j < kernel.size(); ++j)
        os << (j ? " " : "") << format_double(kernel.shift(i, j));
      os << '\n';
    }
  }
}

SpinWave SpinWave::plane(const AtomGeometry& geom, const Vec3& k) {
  if (geom.empty()) throw InvalidArgument("geometry has no atoms");
  SpinWave w;
  const auto n = static_cast<Eigen::Index>(geom.size());
  w.amplitudes.resize(n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index j = 0; j < n; ++j)
    w.amplitudes[j] = std::polar(norm, -k.dot(geom.positions[j]));
  return w;
}

SpinWave SpinWave::ring_mode(int n, int m) {
  if (n < 1) throw InvalidArgument("ring needs at least one atom");
  SpinWave w;
  w.amplitudes.resize(n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (int j = 0; j < n; ++j)
    w.amplitudes[j] = std::polar(norm, -kTwoPi * static_cast<double>(m) * j / n);
  return w;
}

double collective_rate(const DecayKernel& kernel, const Vec3& k, const AtomGeometry& geom) {
  return collective_rate(kernel, SpinWave::plane(geom, k));
}

double collective_rate(const DecayKernel& kernel, const SpinWave& wave) {
  check_sizes(kernel, wave.size());
  const Complex v = wave.amplitudes.dot(kernel.gamma.cast<Complex>() * wave.amplitudes);
  return v.real();
}

std::pair<double, double> evolve_closed(double gamma_k0, double t) {
  if (!(t >= 0.0)) throw InvalidArgument("time must be >= 0");
  if (!(gamma_k0 >= 0.0)) throw InvalidArgument("collective rate must be >= 0");
  const double p = std::exp(-gamma_k0 * t);
  return {p, -std::expm1(-gamma_k0 * t)};
}

SingleExcitationState SingleExcitationState::pure(const SpinWave& wave) {
  return {wave.projector(), 1.0 - wave.amplitudes.squaredNorm()};
}

void SingleExcitationState::validate(double tol) const {
  if (coherences.rows() != coherences.cols()) throw InvalidArgument("coherence block must be square");
  if (std::abs(trace() - 1.0) > tol) throw InvalidArgument("state trace differs from 1");
  if ((coherences - coherences.adjoint()).cwiseAbs().maxCoeff() > tol)
    throw InvalidArgument("coherence block is not Hermitian");
  if (vacuum_pop < -tol || vacuum_pop > 1.0 + tol)
    throw InvalidArgument("vacuum population outside [0, 1]");
}

namespace {

// exp(-M t / 2) for each requested time, via a Hermitian eigendecomposition
// when the shift vanishes and the general matrix exponential otherwise.
class Propagator {
 public:
  explicit Propagator(const DecayKernel& kernel) : kernel_(kernel) {
    hermitian_ = kernel.shift.cwiseAbs().maxCoeff() == 0.0;
    if (hermitian_) eig_.compute(kernel.gamma);
  }

  Eigen::MatrixXcd operator()(double t) const {
    if (hermitian_) {
      const Eigen::VectorXd d = (-0.5 * t * eig_.eigenvalues().array()).exp();
      const Eigen::MatrixXd& v = eig_.eigenvectors();
      return (v * d.asDiagonal() * v.transpose()).cast<Complex>();
    }
    const Eigen::MatrixXcd a = (-0.5 * t) * kernel_.generator();
    return a.exp();
  }

 private:
  const DecayKernel& kernel_;
  bool hermitian_ = true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_;
};

}  // namespace

std::vector<SingleExcitationState> master_solve(const DecayKernel& kernel,
                                                const SingleExcitationState& initial,
                                                std::span<const double> t_grid) {
  check_sizes(kernel, initial.coherences.rows());
  initial.validate();
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] >= 0.0)) throw InvalidArgument("times must be >= 0");
    if (i > 0 && t_grid[i] < t_grid[i - 1]) throw InvalidArgument("times must be ascending");
  }
  const Propagator prop(kernel);
  std::vector<SingleExcitationState> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    const Eigen::MatrixXcd u = prop(t);
    SingleExcitationState s;
    s.coherences = u * initial.coherences * u.adjoint();
    s.coherences = 0.5 * (s.coherences + s.coherences.adjoint()).eval();
    s.vacuum_pop = 1.0 - s.coherences.trace().real();
    if (!s.coherences.allFinite())
      throw ConvergenceFailure("propagation produced non-finite values", t);
    out.push_back(std::move(s));
  }
  return out;
}

double leakage_norm(const SingleExcitationState& state, const SpinWave& wave) {
  const Complex p = wave.amplitudes.dot(state.coherences * wave.amplitudes);
  return (state.coherences - p.real() * wave.projector()).norm();
}

std::vector<TrajectoryPoint> trajectory(const DecayKernel& kernel, const SpinWave& wave,
                                        std::span<const double> t_grid) {
  const auto states = master_solve(kernel, SingleExcitationState::pure(wave), t_grid);
  std::vector<TrajectoryPoint> out;
  out.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const double p = wave.amplitudes.dot(states[i].coherences * wave.amplitudes).real();
    out.push_back({t_grid[i], p, states[i].vacuum_pop, leakage_norm(states[i], wave)});
  }
  return out;
}

Eigen::MatrixXcd two_time_correlator(double gamma_k0, const Vec3& k0, const AtomGeometry& geom,
                                     double tau1, double tau2) {
  return two_time_correlator(gamma_k0, SpinWave::plane(geom, k0), tau1, tau2);
}

Eigen::MatrixXcd two_time_correlator(double gamma_k0, const SpinWave& wave, double tau1,
                                     double tau2) {
  if (!(tau1 >= 0.0 && tau2 >= 0.0)) throw InvalidArgument("correlator times must be >= 0");
  const double decay = std::exp(-0.5 * gamma_k0 * (tau1 + tau2));
  // C_ij = conj(psi_i) psi_j
  return decay * (wave.amplitudes.conjugate() * wave.amplitudes.transpose());
}

Eigen::MatrixXcd regression_correlator(const DecayKernel& kernel, const SpinWave& wave,
                                       double tau1, double tau2) {
  if (!(tau1 >= 0.0 && tau2 >= 0.0)) throw InvalidArgument("correlator times must be >= 0");
  check_sizes(kernel, wave.size());
  const Propagator prop(kernel);
  const Eigen::VectorXcd c1 = prop(tau1) * wave.amplitudes;
  const Eigen::VectorXcd c2 = prop(tau2) * wave.amplitudes;
  return c1.conjugate() * c2.transpose();
}

namespace {

// sum_ij exp(-i k n . (r_i - r_j)) C_ij with phase_j = exp(i k n . r_j).
double phased_sum(const Eigen::MatrixXcd& c, const Eigen::VectorXcd& phase) {
  return phase.dot(c * phase).real();
}

Eigen::VectorXcd emission_phases(const AtomGeometry& geom, const Vec3& kn) {
  Eigen::VectorXcd p(static_cast<Eigen::Index>(geom.size()));
  for (std::size_t j = 0; j < geom.size(); ++j)
    p[static_cast<Eigen::Index>(j)] = std::polar(1.0, kn.dot(geom.positions[j]));
  return p;
}

}  // namespace

std::vector<double> photon_distribution_numeric(const DecayKernel& kernel,
                                                const EmissionConfig& cfg,
                                                const AtomGeometry& geom,
                                                const AngularGrid& grid) {
  cfg.validate();
  const SpinWave wave = SpinWave::plane(geom, cfg.forward());
  check_sizes(kernel, wave.size());
  const double rate = collective_rate(kernel, wave);
  if (!(rate > 0.0)) throw InvalidArgument("read-out spin wave does not decay");

  // Integrating |int dtau exp(-rate tau / 2 + i delta tau)|^2 over the
  // detuning delta gives 2 pi / rate; the emission vertex carries gamma / 2 pi.
  const double lorentzian = cfg.gamma / rate;
  const Eigen::MatrixXcd c0 = two_time_correlator(rate, wave, 0.0, 0.0);
  const double k = cfg.wavenumber();
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Eigen::VectorXcd ph = emission_phases(geom, k * grid.nodes[i]);
    out[i] = dipole_factor(kernel.form, cfg.dipole, grid.nodes[i]) * lorentzian *
             phased_sum(c0, ph);
  }
  return out;
}

std::vector<double> photon_distribution_exact(const DecayKernel& kernel,
                                              const EmissionConfig& cfg,
                                              const AtomGeometry& geom,
                                              const AngularGrid& grid) {
  cfg.validate();
  const SpinWave wave = SpinWave::plane(geom, cfg.forward());
  check_sizes(kernel, wave.size());

  // Q = int_0^inf c c^dagger dtau with c' = -M c / 2 solves M Q + Q M^dagger = 2 psi psi^dagger.
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(kernel.generator());
  const Eigen::MatrixXcd& v = es.eigenvectors();
  const Eigen::VectorXcd& lam = es.eigenvalues();
  if ((lam.real().array() <= 1e-12 * cfg.gamma).any())
    throw ConvergenceFailure("generator has a non-decaying mode", lam.real().minCoeff());
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(v);
  const Eigen::VectorXcd b = lu.solve(wave.amplitudes);
  Eigen::MatrixXcd qt(lam.size(), lam.size());
  for (Eigen::Index a = 0; a < lam.size(); ++a)
    for (Eigen::Index c = 0; c < lam.size(); ++c)
      qt(a, c) = 2.0 * b[a] * std::conj(b[c]) / (lam[a] + std::conj(lam[c]));
  const Eigen::MatrixXcd q = v * qt * v.adjoint();

  const double k = cfg.wavenumber();
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Eigen::VectorXcd ph = emission_phases(geom, k * grid.nodes[i]);
    out[i] = dipole_factor(kernel.form, cfg.dipole, grid.nodes[i]) * cfg.gamma * phased_sum(q.transpose(), ph);
  }
  return out;
}

}  // namespace collemit
