#include "collemit/rydberg.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "collemit/errors.hpp"

namespace collemit {

void RydbergParams::validate() const {
  if (delta == 0.0 || !std::isfinite(delta)) throw InvalidArgument("detuning must be nonzero");
  if (!std::isfinite(omega1) || !std::isfinite(omega2))
    throw InvalidArgument("Rabi frequencies must be finite");
  if (!(u_blockade >= 0.0)) throw InvalidArgument("blockade shift must be >= 0");
  if (pair_mask && pair_mask->rows() != pair_mask->cols())
    throw InvalidArgument("pair mask must be square");
}

bool RydbergParams::perturbative() const {
  const double eff = std::abs(effective_rabi(omega1, omega2, delta));
  return std::abs(omega1) < std::abs(delta) && std::abs(omega2) < std::abs(delta) &&
         (eff == 0.0 || eff < u_blockade);
}

double effective_rabi(double omega1, double omega2, double delta) {
  if (delta == 0.0) throw InvalidArgument("detuning must be nonzero");
  return omega1 * omega2 / delta;
}

namespace {

struct Counts {
  std::vector<std::uint8_t> n_a, n_b;
};

Counts count_levels(int n) {
  const std::size_t dim = dense_dimension(n);
  Counts c;
  c.n_a.resize(dim);
  c.n_b.resize(dim);
  for (std::size_t idx = 0; idx < dim; ++idx) {
    std::size_t rest = idx;
    for (int j = 0; j < n; ++j, rest /= 3) {
      c.n_a[idx] += rest % 3 == 1;
      c.n_b[idx] += rest % 3 == 2;
    }
  }
  return c;
}

}  // namespace

RydbergHamiltonian::RydbergHamiltonian(const RydbergParams& params, const AtomGeometry& geom)
    : n_(static_cast<int>(geom.size())) {
  params.validate();
  if (n_ < 1) throw InvalidArgument("geometry has no atoms");
  if (n_ > kMaxRydbergSites)
    throw ResourceLimit("Rydberg dynamics is limited to " + std::to_string(kMaxRydbergSites) +
                        " atoms");
  if (params.pair_mask && params.pair_mask->rows() != n_)
    throw InvalidArgument("pair mask size differs from the number of atoms");

  const std::size_t dim = dense_dimension(n_);
  std::vector<std::size_t> place(n_);
  for (int j = 0; j < n_; ++j) place[j] = dense_dimension(n_ - 1 - j);
  std::vector<Complex> drive_a(n_), drive_b(n_);
  for (int j = 0; j < n_; ++j) {
    drive_a[j] = std::polar(0.5 * params.omega1, -params.k1.dot(geom.positions[j]));
    drive_b[j] = std::polar(0.5 * params.omega2, -params.k2.dot(geom.positions[j]));
  }
  auto interacts = [&](int i, int j) { return !params.pair_mask || (*params.pair_mask)(i, j); };

  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(dim * (2 * n_ + 1));
  std::vector<int> lv(n_);
  for (std::size_t idx = 0; idx < dim; ++idx) {
    for (int j = 0; j < n_; ++j) lv[j] = static_cast<int>((idx / place[j]) % 3);
    double diag = 0.0;
    for (int j = 0; j < n_; ++j) {
      if (lv[j] == 1) diag -= params.delta;
      if (lv[j] == 2) diag += params.delta;
    }
    if (params.u_blockade != 0.0)
      for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j)
          if (lv[i] != 0 && lv[i] == lv[j] && interacts(i, j)) diag += params.u_blockade;
    if (diag != 0.0) trip.emplace_back(idx, idx, diag);
    for (int j = 0; j < n_; ++j) {
      if (lv[j] != 0) continue;
      const std::size_t ia = idx + place[j], ib = idx + 2 * place[j];
      if (drive_a[j] != 0.0) {
        trip.emplace_back(ia, idx, drive_a[j]);
        trip.emplace_back(idx, ia, std::conj(drive_a[j]));
      }
      if (drive_b[j] != 0.0) {
        trip.emplace_back(ib, idx, drive_b[j]);
        trip.emplace_back(idx, ib, std::conj(drive_b[j]));
      }
    }
  }
  h_.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  h_.setFromTriplets(trip.begin(), trip.end());
  h_.makeCompressed();
}

RydbergHamiltonian build_rydberg_hamiltonian(const RydbergParams& params, const AtomGeometry& geom) {
  return RydbergHamiltonian(params, geom);
}

Eigen::VectorXcd krylov_expmv(const Eigen::SparseMatrix<Complex>& h, const Eigen::VectorXcd& v,
                              double dt, double tol, int max_krylov) {
  const double beta0 = v.norm();
  if (beta0 == 0.0 || dt == 0.0) return v;
  const Eigen::Index dim = v.size();
  const int m_max = static_cast<int>(std::min<Eigen::Index>(max_krylov, dim));

  Eigen::MatrixXcd q(dim, m_max);
  std::vector<double> alpha, beta;
  q.col(0) = v / beta0;
  for (int j = 0; j < m_max; ++j) {
    Eigen::VectorXcd w = h * q.col(j);
    alpha.push_back(q.col(j).dot(w).real());
    // Full reorthogonalization, twice for safety.
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i <= j; ++i) w -= q.col(i).dot(w) * q.col(i);
    const double b = w.norm();

    const int m = j + 1;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) t(i, i) = alpha[i];
    for (int i = 0; i + 1 < m; ++i) t(i, i + 1) = t(i + 1, i) = beta[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const Eigen::MatrixXd& s = es.eigenvectors();
    Eigen::VectorXcd y(m);
    for (int i = 0; i < m; ++i) {
      Complex acc = 0.0;
      for (int l = 0; l < m; ++l) acc += s(i, l) * std::polar(1.0, -dt * es.eigenvalues()[l]) * s(0, l);
      y[i] = acc;
    }
    const bool exhausted = b <= 1e-14 * std::max(1.0, std::abs(alpha[j])) || m == dim;
    if (exhausted || b * std::abs(y[m - 1]) < tol) return beta0 * (q.leftCols(m) * y);
    if (j + 1 < m_max) {
      beta.push_back(b);
      q.col(j + 1) = w / b;
    }
  }
  // Subspace too small for this step: split it.
  const Eigen::VectorXcd half = krylov_expmv(h, v, 0.5 * dt, tol, max_krylov);
  return krylov_expmv(h, half, 0.5 * dt, tol, max_krylov);
}

TargetChannels TargetChannels::from(const RydbergParams& params) {
  return {params.k1, params.k2, params.k2, params.k1};
}

double double_same_species_population(const Eigen::VectorXcd& psi, int n_sites) {
  const Counts c = count_levels(n_sites);
  double p = 0.0;
  for (Eigen::Index i = 0; i < psi.size(); ++i)
    if (c.n_a[i] >= 2 || c.n_b[i] >= 2) p += std::norm(psi[i]);
  return p;
}

double mixed_pair_population(const Eigen::VectorXcd& psi, int n_sites) {
  const Counts c = count_levels(n_sites);
  double p = 0.0;
  for (Eigen::Index i = 0; i < psi.size(); ++i)
    if (c.n_a[i] == 1 && c.n_b[i] == 1) p += std::norm(psi[i]);
  return p;
}

PreparationResult simulate_preparation(const RydbergParams& params, const AtomGeometry& geom,
                                       double t_final, double dt,
                                       const PreparationOptions& options) {
  if (!(t_final >= 0.0)) throw InvalidArgument("final time must be >= 0");
  if (!(dt > 0.0)) throw InvalidArgument("time step must be > 0");
  if (options.n_phase < 1) throw InvalidArgument("phase scan needs at least one point");
  if (geom.size() < 2) throw InvalidArgument("pair preparation needs at least two atoms");
  const RydbergHamiltonian ham(params, geom);
  const int n = ham.n_sites();
  const auto& h = ham.matrix();

  const TargetChannels ch = options.target.value_or(TargetChannels::from(params));
  const DenseState v1 = build_collective_state({{CollectiveTerm{{1.0, 0.0}, 1, 1, ch.k_a1, ch.k_b1}}}, geom);
  const DenseState v2 = build_collective_state({{CollectiveTerm{{1.0, 0.0}, 1, 1, ch.k_a2, ch.k_b2}}}, geom);
  const Complex overlap12 = v1.amplitudes.dot(v2.amplitudes);
  std::vector<Complex> phases(options.n_phase);
  for (int m = 0; m < options.n_phase; ++m)
    phases[m] = std::polar(1.0, kTwoPi * m / options.n_phase);

  const Counts counts = count_levels(n);
  const long long steps = std::max<long long>(1, std::llround(t_final / dt));
  const double h_step = t_final > 0.0 ? t_final / static_cast<double>(steps) : 0.0;

  PreparationResult res;
  res.effective_rabi = effective_rabi(params.omega1, params.omega2, params.delta);
  Eigen::VectorXcd psi = DenseState::vacuum(n).amplitudes;

  auto observe = [&](long long step) {
    const double t = h_step * static_cast<double>(step);
    double dss = 0.0, mixed = 0.0;
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
      const double p = std::norm(psi[i]);
      if (counts.n_a[i] >= 2 || counts.n_b[i] >= 2) dss += p;
      if (counts.n_a[i] == 1 && counts.n_b[i] == 1) mixed += p;
    }
    // Target (v1 + e^{i phi} v2) / norm; scan phi.
    const Complex x1 = v1.amplitudes.dot(psi), x2 = v2.amplitudes.dot(psi);
    double best = 0.0, best_phi = 0.0;
    for (int m = 0; m < options.n_phase; ++m) {
      const double norm2 = 2.0 + 2.0 * std::real(phases[m] * overlap12);
      if (norm2 <= 1e-14) continue;
      const double f = std::norm(x1 + std::conj(phases[m]) * x2) / norm2;
      if (f > best) {
        best = f;
        best_phi = kTwoPi * m / options.n_phase;
      }
    }
    const double norm_err = std::abs(psi.norm() - 1.0);
    res.samples.push_back({t, std::min(best, 1.0), dss, norm_err});
    res.double_same_species_max = std::max(res.double_same_species_max, dss);
    res.mixed_pair_max = std::max(res.mixed_pair_max, mixed);
    res.max_norm_error = std::max(res.max_norm_error, norm_err);
    if (best > res.target_fidelity) {
      res.target_fidelity = std::min(best, 1.0);
      res.best_time = t;
      res.best_phase = best_phi;
    }
    if (options.record_stride > 0 && step % options.record_stride == 0) {
      DenseState s;
      s.n_sites = n;
      s.amplitudes = psi;
      res.trajectory.emplace_back(t, std::move(s));
    }
  };

  observe(0);
  if (t_final == 0.0) return res;
  for (long long s = 1; s <= steps; ++s) {
    Eigen::VectorXcd next = krylov_expmv(h, psi, h_step);
    if (options.check_every > 0 && (s % options.check_every == 0 || s == 1)) {
      const Eigen::VectorXcd half = krylov_expmv(h, krylov_expmv(h, psi, 0.5 * h_step), 0.5 * h_step);
      const double err = (half - next).norm();
      res.max_step_error = std::max(res.max_step_error, err);
      if (err > 1e-8 * std::max(h_step, 1e-300) && err > 1e-12)
        throw ConvergenceFailure("Rydberg step error exceeds tolerance", err);
    }
    psi = std::move(next);
    observe(s);
  }
  return res;
}

}  // namespace collemit
