#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "collemit/dynamics.hpp"
#include "collemit/emission.hpp"
#include "collemit/errors.hpp"
#include "collemit/fit.hpp"
#include "collemit/geometry.hpp"
#include "collemit/rydberg.hpp"
#include "collemit/states.hpp"

namespace py = pybind11;
using namespace collemit;
using namespace pybind11::literals;

namespace {

using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

Positions to_matrix(const AtomGeometry& g) {
  Positions m(static_cast<Eigen::Index>(g.size()), 3);
  for (std::size_t j = 0; j < g.size(); ++j) m.row(static_cast<Eigen::Index>(j)) = g.positions[j].transpose();
  return m;
}

void from_matrix(AtomGeometry& g, const Positions& m) {
  g.positions.clear();
  for (Eigen::Index j = 0; j < m.rows(); ++j) g.positions.emplace_back(m.row(j).transpose());
  g.dims = {static_cast<int>(m.rows()), 1, 1};
  g.spacing.reset();
}

AngularGrid grid_for(const EmissionConfig& cfg, int n_theta, int n_phi) {
  return AngularGrid::gauss_legendre(n_theta, n_phi, cfg.k_laser);
}

FluctuationModel make_model(const std::string& kind, const Vec3& size) {
  if (kind == "fixed") return FixedPositions{};
  if (kind == "thermal") return ThermalFluctuation{size};
  if (kind == "box") return BoxDistribution{size};
  throw InvalidArgument("model must be fixed, thermal or box");
}

DenseState dense(const Eigen::VectorXcd& amplitudes, int n_sites) {
  if (static_cast<std::size_t>(amplitudes.size()) != dense_dimension(n_sites))
    throw InvalidArgument("amplitude vector must have 3^n_sites entries");
  DenseState s;
  s.n_sites = n_sites;
  s.amplitudes = amplitudes;
  return s;
}

py::dict pattern_dict(const EmissionPattern& p) {
  auto vec = [](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); };
  py::dict d("theta"_a = Eigen::VectorXd(vec(p.grid.theta)), "phi"_a = Eigen::VectorXd(vec(p.grid.phi)),
             "weights"_a = Eigen::VectorXd(vec(p.grid.weights)), "f_coh"_a = Eigen::VectorXd(vec(p.f_coh)),
             "f_inc"_a = Eigen::VectorXd(vec(p.f_inc)));
  Positions nodes(static_cast<Eigen::Index>(p.grid.size()), 3);
  for (std::size_t i = 0; i < p.grid.size(); ++i) nodes.row(static_cast<Eigen::Index>(i)) = p.grid.nodes[i].transpose();
  d["nodes"] = nodes;
  d["error_probability"] = error_probability(p);
  if (p.stderr_total) d["stderr"] = Eigen::VectorXd(vec(*p.stderr_total));
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Collective emission patterns, decay dynamics, state ranks and Rydberg preparation";

  py::register_exception<ConvergenceFailure>(m, "ConvergenceError", PyExc_RuntimeError);
  py::register_exception<ResourceLimit>(m, "ResourceLimitError", PyExc_MemoryError);
  py::register_exception<NoPeakError>(m, "NoPeakError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InvalidArgument& e) {
      py::set_error(PyExc_ValueError, e.what());
    }
  });

  py::class_<AtomGeometry>(m, "AtomGeometry")
      .def(py::init<>())
      .def(py::init([](const Positions& pos) {
             AtomGeometry g;
             from_matrix(g, pos);
             return g;
           }),
           "positions"_a)
      .def_property("positions", &to_matrix, &from_matrix)
      .def_readonly("dims", &AtomGeometry::dims)
      .def_readonly("spacing", &AtomGeometry::spacing)
      .def("__len__", &AtomGeometry::size)
      .def("translated", &translated, "shift"_a)
      .def("average_spacing", &average_spacing)
      .def("min_pairwise_distance", &min_pairwise_distance);

  py::class_<EmissionConfig>(m, "EmissionConfig")
      .def(py::init<>())
      .def(py::init([](const Vec3& k_laser, const Vec3& k0, const Vec3& dipole, double gamma) {
             EmissionConfig c{k_laser, k0, dipole, gamma};
             c.validate();
             return c;
           }),
           "k_laser"_a = Vec3(kTwoPi * Vec3::UnitX()), "k0"_a = Vec3(Vec3::Zero()),
           "dipole"_a = Vec3(Vec3::UnitZ()), "gamma"_a = 1.0)
      .def_readwrite("k_laser", &EmissionConfig::k_laser)
      .def_readwrite("k0", &EmissionConfig::k0)
      .def_readwrite("dipole", &EmissionConfig::dipole)
      .def_readwrite("gamma", &EmissionConfig::gamma)
      .def("forward", &EmissionConfig::forward)
      .def("momentum_matched", &EmissionConfig::momentum_matched, "tol"_a = 0.01);

  m.def("build_lattice", &build_lattice, "dims"_a, "d0"_a);
  m.def("build_chain", &build_chain, "n"_a, "d0"_a);
  m.def("build_ring", &build_ring, "n"_a, "spacing"_a);
  m.def(
      "solve_coulomb_chain",
      [](int n, double tolerance, double length_scale) {
        return solve_coulomb_chain({n, tolerance, length_scale});
      },
      "n"_a, "tolerance"_a = 1e-10, "length_scale"_a = 1.0);

  m.def(
      "f_lattice",
      [](const EmissionConfig& cfg, std::array<int, 3> dims, double d0, int n_theta, int n_phi) {
        return pattern_dict(f0_lattice(cfg, dims, d0, grid_for(cfg, n_theta, n_phi)));
      },
      "cfg"_a, "dims"_a, "d0"_a, "n_theta"_a = 64, "n_phi"_a = 64);
  m.def(
      "f_thermal",
      [](const EmissionConfig& cfg, std::array<int, 3> dims, double d0, const Vec3& xi, int n_theta, int n_phi) {
        return pattern_dict(f_thermal(cfg, dims, d0, xi, grid_for(cfg, n_theta, n_phi)));
      },
      "cfg"_a, "dims"_a, "d0"_a, "xi"_a, "n_theta"_a = 64, "n_phi"_a = 64);
  m.def(
      "f_box",
      [](const EmissionConfig& cfg, std::size_t n, const Vec3& box, int n_theta, int n_phi) {
        return pattern_dict(f_box(cfg, n, box, grid_for(cfg, n_theta, n_phi)));
      },
      "cfg"_a, "n_atoms"_a, "box"_a, "n_theta"_a = 64, "n_phi"_a = 64);
  m.def(
      "f_direct",
      [](const AtomGeometry& geom, const EmissionConfig& cfg, const std::string& model, const Vec3& size,
         std::uint64_t seed, std::size_t n_samples, int jobs, int n_theta, int n_phi) {
        py::gil_scoped_release release;
        auto p = f_direct(geom, make_model(model, size), cfg, grid_for(cfg, n_theta, n_phi), seed, n_samples, jobs);
        py::gil_scoped_acquire acquire;
        return pattern_dict(p);
      },
      "geom"_a, "cfg"_a, "model"_a = "fixed", "size"_a = Vec3(Vec3::Zero()), "seed"_a = 0,
      "n_samples"_a = 1, "jobs"_a = 1, "n_theta"_a = 64, "n_phi"_a = 64);
  m.def(
      "error_probability",
      [](const EmissionConfig& cfg, std::array<int, 3> dims, double d0, const Vec3& xi, int n_theta, int n_phi) {
        return error_probability(f_thermal(cfg, dims, d0, xi, grid_for(cfg, n_theta, n_phi)));
      },
      "cfg"_a, "dims"_a, "d0"_a, "xi"_a = Vec3(Vec3::Zero()), "n_theta"_a = 200, "n_phi"_a = 200,
      "Error probability of a (possibly thermal) lattice.");
  m.def(
      "angular_width",
      [](const EmissionConfig& cfg, std::array<int, 3> dims, double d0, int n_theta, int n_phi) {
        const LatticePattern lat(cfg, dims, d0);
        return angular_width(lat, lat.sample(grid_for(cfg, n_theta, n_phi)));
      },
      "cfg"_a, "dims"_a, "d0"_a, "n_theta"_a = 200, "n_phi"_a = 64,
      "FWHM of the coherent cone of a fixed lattice, in radians.");

  m.def(
      "gamma_kernel",
      [](const AtomGeometry& geom, const EmissionConfig& cfg, bool vector, bool shift) {
        const auto k = gamma_kernel(geom, cfg, vector ? KernelForm::Vector : KernelForm::Scalar, shift);
        return py::make_tuple(k.gamma, k.shift);
      },
      "geom"_a, "cfg"_a, "vector"_a = false, "include_shift"_a = false);
  m.def(
      "collective_rate",
      [](const AtomGeometry& geom, const EmissionConfig& cfg, const Vec3& k, bool vector) {
        return collective_rate(gamma_kernel(geom, cfg, vector ? KernelForm::Vector : KernelForm::Scalar), k, geom);
      },
      "geom"_a, "cfg"_a, "k"_a, "vector"_a = false);
  m.def(
      "trajectory",
      [](const AtomGeometry& geom, const EmissionConfig& cfg, const std::vector<double>& times,
         std::optional<int> ring_mode, bool vector, bool shift) {
        const auto k = gamma_kernel(geom, cfg, vector ? KernelForm::Vector : KernelForm::Scalar, shift);
        const SpinWave w = ring_mode ? SpinWave::ring_mode(static_cast<int>(geom.size()), *ring_mode)
                                     : SpinWave::plane(geom, cfg.forward());
        const auto tr = trajectory(k, w, times);
        Eigen::VectorXd t(tr.size()), p(tr.size()), v(tr.size()), l(tr.size());
        for (std::size_t i = 0; i < tr.size(); ++i) {
          const auto j = static_cast<Eigen::Index>(i);
          t[j] = tr[i].t;
          p[j] = tr[i].p_k0;
          v[j] = tr[i].p_vacuum;
          l[j] = tr[i].leakage_norm;
        }
        return py::dict("t"_a = t, "p_k0"_a = p, "p_vacuum"_a = v, "leakage_norm"_a = l,
                        "gamma_k0"_a = collective_rate(k, w));
      },
      "geom"_a, "cfg"_a, "times"_a, "ring_mode"_a = py::none(), "vector"_a = false, "include_shift"_a = false);

  m.def(
      "collective_state",
      [](const std::vector<std::tuple<Complex, int, int, Vec3, Vec3>>& terms, const AtomGeometry& geom) {
        CollectiveSpec spec;
        for (const auto& [a, na, nb, ka, kb] : terms) spec.terms.push_back({a, na, nb, ka, kb});
        const auto s = build_collective_state(spec, geom);
        return py::make_tuple(s.amplitudes, s.raw_norm);
      },
      "terms"_a, "geom"_a,
      "Terms are (amplitude, n_a, n_b, k_a, k_b). Returns (amplitudes, raw_norm).");
  m.def(
      "schmidt_ranks",
      [](const Eigen::VectorXcd& amplitudes, int n_sites, double tol) {
        std::vector<int> out;
        for (auto [cut, r] : schmidt_report(dense(amplitudes, n_sites), tol).cut_ranks) out.push_back(r);
        return out;
      },
      "amplitudes"_a, "n_sites"_a, "tolerance"_a = 1e-10);
  m.def(
      "mps_bond_dims",
      [](const Eigen::VectorXcd& amplitudes, int n_sites, double tol) {
        const auto s = dense(amplitudes, n_sites);
        const auto mps = mps_from_dense(s, tol);
        return py::make_tuple(mps.bond_dims, (mps.contract() - s.amplitudes).norm());
      },
      "amplitudes"_a, "n_sites"_a, "tolerance"_a = 1e-10,
      "Returns (bond dimensions, reconstruction error).");
  m.def("bond_dimension_bound", py::overload_cast<int, int, int>(&bond_dimension_bound), "m"_a, "n_a"_a,
        "n_b"_a);

  m.def(
      "simulate_preparation",
      [](const AtomGeometry& geom, double omega1, double omega2, double delta, double u, const Vec3& k1,
         const Vec3& k2, double t_final, double dt, int n_phase) {
        RydbergParams p;
        p.omega1 = omega1;
        p.omega2 = omega2;
        p.delta = delta;
        p.u_blockade = u;
        p.k1 = k1;
        p.k2 = k2;
        PreparationOptions opt;
        opt.n_phase = n_phase;
        PreparationResult r;
        {
          py::gil_scoped_release release;
          r = simulate_preparation(p, geom, t_final, dt, opt);
        }
        return py::dict("double_same_species_max"_a = r.double_same_species_max,
                        "mixed_pair_max"_a = r.mixed_pair_max, "target_fidelity"_a = r.target_fidelity,
                        "best_time"_a = r.best_time, "best_phase"_a = r.best_phase,
                        "effective_rabi"_a = r.effective_rabi, "max_norm_error"_a = r.max_norm_error);
      },
      "geom"_a, "omega1"_a, "omega2"_a, "delta"_a, "u"_a, "k1"_a, "k2"_a, "t_final"_a, "dt"_a,
      "n_phase"_a = 360);

  m.def(
      "fit_power_law",
      [](const std::vector<double>& x, const std::vector<double>& y, bool exclude_smallest) {
        const auto f = fit_power_law(x, y, exclude_smallest);
        return py::dict("exponent"_a = f.exponent, "exponent_stderr"_a = f.exponent_stderr,
                        "prefactor"_a = f.prefactor, "n_points"_a = f.n_points);
      },
      "x"_a, "y"_a, "exclude_smallest"_a = true);
}
