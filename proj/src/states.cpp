#include "collemit/states.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "collemit/errors.hpp"

namespace collemit {

int CollectiveSpec::max_n_a() const {
  int m = 0;
  for (const auto& t : terms) m = std::max(m, t.n_a);
  return m;
}

int CollectiveSpec::max_n_b() const {
  int m = 0;
  for (const auto& t : terms) m = std::max(m, t.n_b);
  return m;
}

void CollectiveSpec::validate() const {
  if (terms.empty()) throw InvalidArgument("collective spec has no terms");
  double norm2 = 0.0;
  for (const auto& t : terms) {
    if (t.n_a < 0 || t.n_b < 0) throw InvalidArgument("excitation numbers must be >= 0");
    norm2 += std::norm(t.amplitude);
  }
  if (std::abs(norm2 - 1.0) > 1e-12) throw InvalidArgument("term amplitudes must be normalized");
}

CollectiveSpec w_state_spec(const Vec3& k) {
  return {{CollectiveTerm{{1.0, 0.0}, 1, 0, k, Vec3::Zero()}}};
}

CollectiveSpec two_spin_wave_spec(const Vec3& k, const Vec3& q) {
  const Complex a(1.0 / std::sqrt(2.0), 0.0);
  return {{CollectiveTerm{a, 1, 1, k, q}, CollectiveTerm{a, 1, 1, q, k}}};
}

std::size_t dense_dimension(int n_sites) {
  std::size_t d = 1;
  for (int i = 0; i < n_sites; ++i) d *= 3;
  return d;
}

Level level_at(std::size_t index, int site, int n_sites) {
  for (int s = n_sites - 1; s > site; --s) index /= 3;
  return static_cast<Level>(index % 3);
}

namespace {

void check_sites(int n) {
  if (n < 1) throw InvalidArgument("state needs at least one site");
  if (n > kMaxDenseSites)
    throw ResourceLimit("dense states are limited to " + std::to_string(kMaxDenseSites) + " sites");
}

}  // namespace

DenseState DenseState::vacuum(int n_sites) {
  check_sites(n_sites);
  DenseState s;
  s.n_sites = n_sites;
  s.amplitudes = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dense_dimension(n_sites)));
  s.amplitudes[0] = 1.0;
  return s;
}

DenseState DenseState::basis(const std::vector<Level>& config) {
  DenseState s = vacuum(static_cast<int>(config.size()));
  std::size_t idx = 0;
  for (Level l : config) idx = 3 * idx + static_cast<std::size_t>(l);
  s.amplitudes[0] = 0.0;
  s.amplitudes[static_cast<Eigen::Index>(idx)] = 1.0;
  return s;
}

DenseState build_collective_state(const CollectiveSpec& spec, const AtomGeometry& geom) {
  spec.validate();
  const int n = static_cast<int>(geom.size());
  check_sites(n);
  for (const auto& t : spec.terms)
    if (t.n_a + t.n_b > n) throw InvalidArgument("more excitations than atoms");

  // (sum_j x_j sigma_j^dagger)^n with hard-core sites gives n! times the sum
  // over n-element site sets, so each configuration carries
  // sqrt(n_a! n_b!) N^{-(n_a+n_b)/2} times its phases.
  struct Prepared {
    Complex prefactor;
    int n_a, n_b;
    std::vector<Complex> phase_a, phase_b;
  };
  std::vector<Prepared> prep;
  for (const auto& t : spec.terms) {
    Prepared p{t.amplitude *
                   std::sqrt(std::tgamma(t.n_a + 1.0) * std::tgamma(t.n_b + 1.0)) *
                   std::pow(static_cast<double>(n), -0.5 * (t.n_a + t.n_b)),
               t.n_a, t.n_b, {}, {}};
    for (const auto& r : geom.positions) {
      p.phase_a.push_back(std::polar(1.0, -t.k_a.dot(r)));
      p.phase_b.push_back(std::polar(1.0, -t.k_b.dot(r)));
    }
    prep.push_back(std::move(p));
  }

  DenseState s;
  s.n_sites = n;
  const std::size_t dim = dense_dimension(n);
  s.amplitudes = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim));
  std::vector<int> digits(n);
  for (std::size_t idx = 0; idx < dim; ++idx) {
    std::size_t rest = idx;
    int na = 0, nb = 0;
    for (int j = n - 1; j >= 0; --j) {
      digits[j] = static_cast<int>(rest % 3);
      rest /= 3;
      na += digits[j] == 1;
      nb += digits[j] == 2;
    }
    Complex amp = 0.0;
    for (const auto& p : prep) {
      if (p.n_a != na || p.n_b != nb) continue;
      Complex v = p.prefactor;
      for (int j = 0; j < n; ++j) {
        if (digits[j] == 1) v *= p.phase_a[j];
        else if (digits[j] == 2) v *= p.phase_b[j];
      }
      amp += v;
    }
    s.amplitudes[static_cast<Eigen::Index>(idx)] = amp;
  }
  s.raw_norm = s.amplitudes.norm();
  if (!(s.raw_norm > 0.0)) throw InvalidArgument("collective state vanishes (terms cancel)");
  s.amplitudes /= s.raw_norm;
  return s;
}

namespace {

using RowMajorXcd = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

int count_rank(const Eigen::VectorXd& sv, double tolerance) {
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tolerance * sv[0]) ++r;
  return r;
}

}  // namespace

Eigen::VectorXd schmidt_values(const DenseState& state, int cut) {
  if (cut < 1 || cut > state.n_sites - 1) throw InvalidArgument("cut must lie between sites");
  const auto rows = static_cast<Eigen::Index>(dense_dimension(cut));
  const auto cols = static_cast<Eigen::Index>(dense_dimension(state.n_sites - cut));
  const Eigen::Map<const RowMajorXcd> m(state.amplitudes.data(), rows, cols);
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues();
}

int schmidt_rank(const DenseState& state, int cut, double tolerance) {
  if (!(tolerance > 0.0)) throw InvalidArgument("rank tolerance must be > 0");
  return count_rank(schmidt_values(state, cut), tolerance);
}

SchmidtReport schmidt_report(const DenseState& state, double tolerance) {
  SchmidtReport rep;
  rep.tolerance = tolerance;
  rep.max_rank = 1;
  for (int c = 1; c < state.n_sites; ++c) {
    const int r = schmidt_rank(state, c, tolerance);
    rep.cut_ranks.emplace_back(c, r);
    rep.max_rank = std::max(rep.max_rank, r);
  }
  return rep;
}

int bond_dimension_bound(int m, int n_a, int n_b) {
  if (m < 1) throw InvalidArgument("number of terms must be >= 1");
  if (n_a < 0 || n_b < 0) throw InvalidArgument("excitation numbers must be >= 0");
  return m * (n_a + 1) * (n_b + 1);
}

int bond_dimension_bound(const CollectiveSpec& spec) {
  return bond_dimension_bound(spec.size(), spec.max_n_a(), spec.max_n_b());
}

int Mps::max_bond() const {
  int m = 1;
  for (int d : bond_dims) m = std::max(m, d);
  return m;
}

Eigen::VectorXcd Mps::contract() const {
  // Rows of `left` enumerate configurations of the sites contracted so far.
  Eigen::MatrixXcd left = Eigen::MatrixXcd::Ones(1, 1);
  for (const auto& site : sites) {
    const Eigen::Index cols = site[0].cols();
    Eigen::MatrixXcd next(left.rows() * 3, cols);
    for (Eigen::Index r = 0; r < left.rows(); ++r)
      for (int s = 0; s < 3; ++s) next.row(3 * r + s) = left.row(r) * site[s];
    left = std::move(next);
  }
  return left.col(0);
}

Mps mps_from_dense(const DenseState& state, double tolerance) {
  check_sites(state.n_sites);
  if (!(tolerance > 0.0)) throw InvalidArgument("rank tolerance must be > 0");
  const int n = state.n_sites;
  Mps mps;
  // `rest` holds the not yet decomposed part, rows = (bond, site digit), row-major.
  RowMajorXcd rest = Eigen::Map<const RowMajorXcd>(
      state.amplitudes.data(), 3, static_cast<Eigen::Index>(dense_dimension(n - 1)));
  Eigen::Index bond = 1;
  for (int j = 0; j < n - 1; ++j) {
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(rest, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const int r = std::max(1, count_rank(svd.singularValues(), tolerance));
    const Eigen::MatrixXcd u = svd.matrixU().leftCols(r);
    std::array<Eigen::MatrixXcd, 3> site;
    for (int s = 0; s < 3; ++s) {
      site[s].resize(bond, r);
      for (Eigen::Index a = 0; a < bond; ++a) site[s].row(a) = u.row(3 * a + s);
    }
    mps.sites.push_back(std::move(site));
    mps.bond_dims.push_back(r);

    const RowMajorXcd sv = svd.singularValues().head(r).cast<Complex>().asDiagonal() *
                           svd.matrixV().leftCols(r).adjoint();
    // Reshape (r, 3 * remaining) into (3 r, remaining) keeping row-major order.
    const Eigen::Index remaining = sv.cols() / 3;
    rest = Eigen::Map<const RowMajorXcd>(sv.data(), 3 * r, remaining);
    bond = r;
  }
  std::array<Eigen::MatrixXcd, 3> last;
  for (int s = 0; s < 3; ++s) {
    last[s].resize(bond, 1);
    for (Eigen::Index a = 0; a < bond; ++a) last[s](a, 0) = rest(3 * a + s, 0);
  }
  mps.sites.push_back(std::move(last));
  return mps;
}

int gate_qubits(int bond_dim) {
  if (bond_dim < 1) throw InvalidArgument("bond dimension must be >= 1");
  int q = 0;
  while ((1 << (q + 1)) <= bond_dim) ++q;
  return q + 1;
}

double fidelity(const DenseState& a, const DenseState& b) {
  if (a.n_sites != b.n_sites || a.amplitudes.size() != b.amplitudes.size())
    throw InvalidArgument("states have different numbers of sites");
  return std::min(1.0, std::norm(a.amplitudes.dot(b.amplitudes)));
}

}  // namespace collemit
