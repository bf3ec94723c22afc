#include "collemit/cli/commands.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "collemit/csv.hpp"
#include "collemit/dynamics.hpp"
#include "collemit/emission.hpp"
#include "collemit/fit.hpp"
#include "collemit/geometry.hpp"
#include "collemit/quadrature.hpp"
#include "collemit/rydberg.hpp"
#include "collemit/states.hpp"

namespace collemit::cli {

using nlohmann::json;

Format parse_format(const std::string& s) {
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  if (s == "both") return Format::Both;
  throw ConfigError("--format must be csv, json or both, got '" + s + "'");
}

namespace {

bool want_csv(const GlobalOptions& o) { return o.format != Format::Json; }
bool want_json(const GlobalOptions& o) { return o.format != Format::Csv; }

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

std::filesystem::path output_path(const GlobalOptions& opts, const std::string& name) {
  std::filesystem::create_directories(opts.out_dir);
  return opts.out_dir / name;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << content;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

int positive_int(const Config& cfg, const std::string& s, const std::string& k, long long def,
                 long long min = 1) {
  const long long v = cfg.integer(s, k, def);
  if (v < min || v > std::numeric_limits<int>::max())
    throw ConfigError(key_name(s, k) + " must be >= " + std::to_string(min));
  return static_cast<int>(v);
}

double positive(const Config& cfg, const std::string& s, const std::string& k) {
  const double v = cfg.number(s, k);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key_name(s, k) + " must be > 0");
  return v;
}

// ---------------------------------------------------------------- scene

EmissionConfig drive_config(const Config& cfg) {
  const Vec3 dir = cfg.vec3("drive", "direction", Vec3::UnitX());
  if (!(dir.norm() > 0.0)) throw ConfigError(key_name("drive", "direction") + " must be nonzero");
  EmissionConfig ec = EmissionConfig::along(dir);
  // Wavevectors in the config are in units of |k_L| = 2 pi / lambda.
  ec.k0 = kTwoPi * cfg.vec3("drive", "k0", Vec3::Zero());
  if (cfg.has("drive", "dipole")) {
    const Vec3 d = cfg.vec3("drive", "dipole");
    if (!(d.norm() > 0.0)) throw ConfigError(key_name("drive", "dipole") + " must be nonzero");
    ec.dipole = d.normalized();
  }
  ec.gamma = cfg.has("drive", "gamma") ? positive(cfg, "drive", "gamma") : 1.0;
  return ec;
}

struct Scene {
  std::string type;
  AtomGeometry geom;
  FluctuationModel model = FixedPositions{};
  std::optional<double> d0_over_lambda;
};

AtomGeometry box_reference_positions(int n, const Vec3& box) {
  // Reference sites on a cube-filling grid; the box model ignores them
  // except for the spin-wave phases.
  int side = 1;
  while (side * side * side < n) ++side;
  AtomGeometry g = build_lattice({side, side, side}, 1.0);
  g.positions.resize(n);
  for (auto& r : g.positions) r = r.cwiseProduct(box) / side;
  g.dims = {n, 1, 1};
  g.spacing.reset();
  return g;
}

Scene build_scene(const Config& cfg) {
  Scene sc;
  sc.type = cfg.text("geometry", "type");
  const auto& t = sc.type;
  std::optional<Vec3> box;
  if (t == "lattice") {
    const auto dims = cfg.list("geometry", "dims");
    if (dims.size() != 3) throw ConfigError(key_name("geometry", "dims") + ": expected three counts");
    std::array<int, 3> d{};
    for (int a = 0; a < 3; ++a) {
      if (dims[a] < 1 || dims[a] != std::floor(dims[a]))
        throw ConfigError(key_name("geometry", "dims") + ": counts must be integers >= 1");
      d[a] = static_cast<int>(dims[a]);
    }
    sc.geom = build_lattice(d, positive(cfg, "geometry", "d0"));
  } else if (t == "chain") {
    sc.geom = build_chain(positive_int(cfg, "geometry", "n", 0), positive(cfg, "geometry", "d0"));
  } else if (t == "ring") {
    sc.geom = build_ring(positive_int(cfg, "geometry", "n", 0), positive(cfg, "geometry", "d0"));
    sc.geom.spacing = positive(cfg, "geometry", "d0");
  } else if (t == "coulomb") {
    TrapParams tp;
    tp.n_ions = positive_int(cfg, "geometry", "n", 0);
    if (cfg.has("geometry", "tolerance")) tp.tolerance = positive(cfg, "geometry", "tolerance");
    if (cfg.has("geometry", "length_scale"))
      tp.length_scale = positive(cfg, "geometry", "length_scale");
    sc.geom = solve_coulomb_chain(tp);
    if (cfg.has("geometry", "mean_spacing")) {
      if (cfg.has("geometry", "length_scale"))
        throw ConfigError(key_name("geometry", "mean_spacing") + " conflicts with length_scale");
      sc.geom = rescale_to_spacing(sc.geom, positive(cfg, "geometry", "mean_spacing"));
    }
  } else if (t == "box") {
    const int n = positive_int(cfg, "geometry", "n", 0);
    if (cfg.has("geometry", "box")) {
      box = cfg.vec3("geometry", "box");
    } else {
      const double l = positive(cfg, "geometry", "d0") * std::cbrt(static_cast<double>(n));
      box = Vec3::Constant(l);
    }
    if ((box->array() <= 0.0).any()) throw ConfigError(key_name("geometry", "box") + " must be > 0");
    sc.geom = box_reference_positions(n, *box);
  } else if (t == "file") {
    std::ifstream is(cfg.text("geometry", "file"));
    if (!is) throw ConfigError(key_name("geometry", "file") + ": cannot open file");
    sc.geom = read_geometry(is);
    if (sc.geom.empty()) throw ConfigError(key_name("geometry", "file") + ": no atoms");
  } else {
    throw ConfigError(key_name("geometry", "type") + ": unknown geometry '" + t + "'");
  }

  const std::string model = cfg.text("fluctuation", "model", t == "box" ? "box" : "fixed");
  if (model == "fixed") {
    if (t == "box") throw ConfigError(key_name("fluctuation", "model") + ": box geometry needs the box model");
    sc.model = FixedPositions{};
  } else if (model == "thermal") {
    Vec3 xi;
    if (cfg.has("fluctuation", "xi")) {
      xi = cfg.vec3("fluctuation", "xi");
    } else {
      xi = xi_thermal(cfg.vec3("fluctuation", "x0"),
                      cfg.vec3("fluctuation", "n_thermal", Vec3::Zero()));
    }
    if ((xi.array() < 0.0).any()) throw ConfigError(key_name("fluctuation", "xi") + " must be >= 0");
    sc.model = ThermalFluctuation{xi};
  } else if (model == "box") {
    if (cfg.has("fluctuation", "box")) box = cfg.vec3("fluctuation", "box");
    if (!box) throw ConfigError("missing required key " + key_name("fluctuation", "box"));
    if ((box->array() <= 0.0).any()) throw ConfigError(key_name("fluctuation", "box") + " must be > 0");
    sc.model = BoxDistribution{*box};
  } else {
    throw ConfigError(key_name("fluctuation", "model") + ": unknown model '" + model + "'");
  }

  if (box) {
    sc.d0_over_lambda = box->prod() > 0.0
                            ? std::cbrt(box->prod() / static_cast<double>(sc.geom.size()))
                            : 0.0;
  } else if (sc.geom.size() >= 2) {
    try {
      sc.d0_over_lambda = average_spacing(sc.geom);
    } catch (const InvalidArgument&) {
      sc.d0_over_lambda.reset();
    }
  }
  return sc;
}

// ---------------------------------------------------------------- emission

struct PatternRun {
  Scene scene;
  EmissionConfig drive;
  std::unique_ptr<PatternModel> model;
  EmissionPattern pattern;
  EmissionSummary summary;
  std::optional<double> gamma_ratio;
  std::string method;
  std::optional<std::uint64_t> seed;
  std::size_t n_samples = 0;
  std::string fwhm_note;
};

bool regular_lattice(const Scene& sc) {
  return (sc.type == "lattice" || sc.type == "chain") && sc.geom.spacing.has_value();
}

PatternRun evaluate_pattern(const Config& cfg, const GlobalOptions& opts, int jobs) {
  PatternRun run;
  run.scene = build_scene(cfg);
  run.drive = drive_config(cfg);
  const auto& sc = run.scene;
  const int n_theta = positive_int(cfg, "grid", "n_theta", 200, 2);
  const int n_phi = positive_int(cfg, "grid", "n_phi", 200, 1);
  const AngularGrid grid = AngularGrid::gauss_legendre(n_theta, n_phi, run.drive.k_laser);

  const std::string method = cfg.text("sampling", "method", "auto");
  if (method != "auto" && method != "closed" && method != "direct")
    throw ConfigError(key_name("sampling", "method") + ": expected auto, closed or direct");

  const bool fixed = is_fixed(sc.model);
  const bool has_closed =
      std::holds_alternative<BoxDistribution>(sc.model) || regular_lattice(sc);
  if (method == "closed" && !has_closed)
    throw ConfigError(key_name("sampling", "method") + ": no closed form for this geometry");

  const bool use_closed = method != "direct" && has_closed;
  if (use_closed) {
    run.method = "closed_form";
    if (const auto* t = std::get_if<ThermalFluctuation>(&sc.model)) {
      run.model = std::make_unique<ThermalPattern>(run.drive, sc.geom.dims, *sc.geom.spacing, t->xi);
    } else if (const auto* b = std::get_if<BoxDistribution>(&sc.model)) {
      run.model = std::make_unique<BoxPattern>(run.drive, sc.geom.size(), b->size);
    } else {
      run.model = std::make_unique<LatticePattern>(run.drive, sc.geom.dims, *sc.geom.spacing);
    }
    run.pattern = run.model->sample(grid);
  } else if (fixed) {
    run.method = "direct_sum";
    run.model = std::make_unique<DirectPattern>(sc.geom, sc.model, run.drive, 0, 1, jobs);
    run.pattern = run.model->sample(grid);
  } else {
    run.method = "monte_carlo";
    run.seed = opts.seed;
    if (!run.seed && cfg.has("sampling", "seed")) run.seed = cfg.u64("sampling", "seed");
    if (!run.seed)
      throw ConfigError("missing required key " + key_name("sampling", "seed") +
                        " (or --seed) for Monte Carlo sampling");
    run.n_samples = static_cast<std::size_t>(positive_int(cfg, "sampling", "n_samples", 100000, 100));
    auto direct = std::make_unique<DirectPattern>(sc.geom, sc.model, run.drive, *run.seed,
                                                  run.n_samples, jobs);
    run.pattern = f_direct(sc.geom, sc.model, run.drive, grid, *run.seed, run.n_samples, jobs);
    run.model = std::move(direct);
  }

  run.summary = summarize(*run.model, run.pattern);
  if (!run.summary.fwhm_rad) {
    try {
      angular_width(*run.model, run.pattern);
    } catch (const NoPeakError& e) {
      run.fwhm_note = e.what();
    }
  }

  if (!std::holds_alternative<BoxDistribution>(sc.model) && min_pairwise_distance(sc.geom) > 0.0) {
    const DecayKernel kernel = gamma_kernel(sc.geom, run.drive);
    run.gamma_ratio = collective_rate(kernel, run.drive.forward(), sc.geom) / run.drive.gamma;
  }
  return run;
}

std::string fluctuation_name(const FluctuationModel& m) {
  if (std::holds_alternative<ThermalFluctuation>(m)) return "thermal";
  if (std::holds_alternative<BoxDistribution>(m)) return "box";
  return "fixed";
}

json summary_json(const PatternRun& run, int n_theta, int n_phi) {
  const auto& s = run.summary;
  json j;
  j["error_probability"] = s.error_probability;
  j["fwhm_rad"] = s.fwhm_rad ? json(*s.fwhm_rad) : json(nullptr);
  j["peak_direction"] = vec_json(s.peak_direction);
  j["peak_value"] = s.peak_value;
  j["n_atoms"] = run.scene.geom.size();
  j["d0_over_lambda"] =
      run.scene.d0_over_lambda ? json(*run.scene.d0_over_lambda) : json(nullptr);
  j["gamma_k0_over_gamma"] = run.gamma_ratio ? json(*run.gamma_ratio) : json(nullptr);
  json meta;
  meta["geometry"] = run.scene.type;
  meta["fluctuation"] = fluctuation_name(run.scene.model);
  meta["method"] = run.method;
  meta["grid"] = json::array({n_theta, n_phi});
  meta["seed"] = run.seed ? json(*run.seed) : json(nullptr);
  meta["n_samples"] = run.n_samples ? json(run.n_samples) : json(nullptr);
  meta["box_sinc_argument"] = "q*L/2";
  meta["momentum_matched"] = run.drive.momentum_matched();
  if (!run.fwhm_note.empty()) meta["fwhm_note"] = run.fwhm_note;
  j["metadata"] = meta;
  return j;
}

std::string pattern_csv(const EmissionPattern& p) {
  std::ostringstream os;
  std::vector<std::string> header = {"theta_rad", "phi_rad", "f_coh", "f_inc", "f_total"};
  if (p.stderr_total) header.push_back("stderr");
  CsvWriter w(os, header);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.stderr_total)
      w.row({p.grid.theta[i], p.grid.phi[i], p.f_coh[i], p.f_inc[i], p.total(i), (*p.stderr_total)[i]});
    else
      w.row({p.grid.theta[i], p.grid.phi[i], p.f_coh[i], p.f_inc[i], p.total(i)});
  }
  return os.str();
}

void run_dynamics(const Config& cfg, const PatternRun& run, const GlobalOptions& opts,
                  std::ostream& log) {
  if (!is_fixed(run.scene.model))
    throw ConfigError("[dynamics] requires fixed positions");
  const std::string form = cfg.text("dynamics", "form", "scalar");
  if (form != "scalar" && form != "vector")
    throw ConfigError(key_name("dynamics", "form") + ": expected scalar or vector");
  const DecayKernel kernel =
      gamma_kernel(run.scene.geom, run.drive, form == "vector" ? KernelForm::Vector : KernelForm::Scalar,
                   cfg.flag("dynamics", "shift", false));
  const std::string wave_kind = cfg.text("dynamics", "wave", "plane");
  SpinWave wave;
  if (wave_kind == "plane") {
    wave = SpinWave::plane(run.scene.geom, run.drive.forward());
  } else if (wave_kind == "ring_mode") {
    if (run.scene.type != "ring") throw ConfigError(key_name("dynamics", "wave") + ": ring_mode needs a ring geometry");
    wave = SpinWave::ring_mode(static_cast<int>(run.scene.geom.size()),
                               static_cast<int>(cfg.integer("dynamics", "mode", 0)));
  } else {
    throw ConfigError(key_name("dynamics", "wave") + ": expected plane or ring_mode");
  }
  const double t_final = positive(cfg, "dynamics", "t_final");
  const int n_steps = positive_int(cfg, "dynamics", "n_steps", 100);
  std::vector<double> t(n_steps + 1);
  for (int i = 0; i <= n_steps; ++i) t[i] = t_final * i / n_steps;
  const auto traj = trajectory(kernel, wave, t);

  std::ostringstream os;
  CsvWriter w(os, {"t", "p_k0", "p_vacuum", "leakage_norm"});
  double leak = 0.0;
  for (const auto& p : traj) {
    w.row({p.t, p.p_k0, p.p_vacuum, p.leakage_norm});
    leak = std::max(leak, p.leakage_norm);
  }
  write_text(output_path(opts, "trajectory.csv"), os.str());
  std::ostringstream ks;
  write_kernel(ks, kernel);
  write_text(output_path(opts, "kernel.txt"), ks.str());
  log << "collective rate of the dynamics spin wave: "
      << format_double(collective_rate(kernel, wave) / run.drive.gamma) << " Gamma\n"
      << "max leakage norm: " << format_double(leak) << '\n';
}

// ---------------------------------------------------------------- rydberg

struct RydbergRun {
  RydbergParams params;
  PreparationResult result;
};

RydbergRun evaluate_rydberg(const Config& cfg) {
  if (!cfg.has_section("rydberg")) throw ConfigError("missing section [rydberg]");
  const Scene sc = build_scene(cfg);
  if (!is_fixed(sc.model)) throw ConfigError("[rydberg] requires fixed positions");
  RydbergRun run;
  auto& p = run.params;
  p.delta = cfg.number("rydberg", "delta", 1.0);
  if (p.delta == 0.0) throw ConfigError(key_name("rydberg", "delta") + " must be nonzero");
  p.omega1 = cfg.number("rydberg", "omega1", 0.05 * std::abs(p.delta));
  p.omega2 = cfg.number("rydberg", "omega2", 0.05 * std::abs(p.delta));
  const double eff = std::abs(effective_rabi(p.omega1, p.omega2, p.delta));
  if (cfg.has("rydberg", "u") && cfg.has("rydberg", "u_over_omega_eff"))
    throw ConfigError(key_name("rydberg", "u") + " conflicts with u_over_omega_eff");
  if (cfg.has("rydberg", "u"))
    p.u_blockade = cfg.number("rydberg", "u");
  else
    p.u_blockade = cfg.number("rydberg", "u_over_omega_eff", 1000.0) * eff;
  if (!(p.u_blockade >= 0.0)) throw ConfigError(key_name("rydberg", "u") + " must be >= 0");
  p.k1 = kTwoPi * cfg.vec3("rydberg", "k1", Vec3::UnitX());
  p.k2 = kTwoPi * cfg.vec3("rydberg", "k2", Vec3::UnitY());
  const std::string mask = cfg.text("rydberg", "pair_mask", "all");
  const int n = static_cast<int>(sc.geom.size());
  if (mask == "nearest") {
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = std::abs(i - j) == 1;
    p.pair_mask = m;
  } else if (mask != "all") {
    throw ConfigError(key_name("rydberg", "pair_mask") + ": expected all or nearest");
  }

  PreparationOptions o;
  TargetChannels ch = TargetChannels::from(p);
  if (cfg.has("rydberg", "k_a1")) ch.k_a1 = kTwoPi * cfg.vec3("rydberg", "k_a1");
  if (cfg.has("rydberg", "k_b1")) ch.k_b1 = kTwoPi * cfg.vec3("rydberg", "k_b1");
  if (cfg.has("rydberg", "k_a2")) ch.k_a2 = kTwoPi * cfg.vec3("rydberg", "k_a2");
  if (cfg.has("rydberg", "k_b2")) ch.k_b2 = kTwoPi * cfg.vec3("rydberg", "k_b2");
  o.target = ch;
  o.n_phase = positive_int(cfg, "rydberg", "n_phase", 360);

  double t_final = 0.0;
  if (cfg.has("rydberg", "t_final"))
    t_final = positive(cfg, "rydberg", "t_final");
  else if (eff > 0.0)
    t_final = kTwoPi / eff;
  else
    throw ConfigError("missing required key " + key_name("rydberg", "t_final"));
  const double dt = cfg.has("rydberg", "dt") ? positive(cfg, "rydberg", "dt") : 1.0 / std::abs(p.delta);
  run.result = simulate_preparation(p, sc.geom, t_final, dt, o);
  return run;
}

json rydberg_json(const RydbergRun& run) {
  const auto& r = run.result;
  json j;
  j["effective_rabi"] = r.effective_rabi;
  j["u_blockade"] = run.params.u_blockade;
  j["double_same_species_max"] = r.double_same_species_max;
  j["mixed_pair_max"] = r.mixed_pair_max;
  j["target_fidelity"] = r.target_fidelity;
  j["best_time"] = r.best_time;
  j["best_phase"] = r.best_phase;
  j["max_step_error"] = r.max_step_error;
  j["max_norm_error"] = r.max_norm_error;
  j["perturbative"] = run.params.perturbative();
  return j;
}

// ---------------------------------------------------------------- sweep helpers

std::string join_numbers(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_double(v[i]);
  return s;
}

Config apply_sweep_value(Config cfg, const std::string& variable, double value) {
  if (variable == "N") {
    if (value < 1 || value != std::floor(value))
      throw ConfigError(key_name("sweep", "values") + ": N must be a positive integer");
    const std::string type = cfg.text("geometry", "type");
    if (type == "lattice") {
      auto dims = cfg.list("geometry", "dims");
      int free_axes = 0;
      for (double d : dims) free_axes += d > 1;
      if (free_axes == 0) free_axes = 1, dims[0] = 2;
      const long long side = std::llround(std::pow(value, 1.0 / free_axes));
      long long total = 1;
      for (int a = 0; a < free_axes; ++a) total *= side;
      if (total != static_cast<long long>(value))
        throw ConfigError(key_name("sweep", "values") + ": N must be a perfect power for this lattice");
      for (double& d : dims) d = d > 1 ? static_cast<double>(side) : 1.0;
      cfg.set("geometry", "dims", join_numbers(dims));
    } else {
      cfg.set("geometry", "n", format_double(value));
    }
  } else if (variable == "d0_over_lambda") {
    if (cfg.text("geometry", "type") == "coulomb") {
      cfg.set("geometry", "mean_spacing", format_double(value));
    } else {
      cfg.erase("geometry", "box");
      cfg.set("geometry", "d0", format_double(value));
    }
  } else if (variable == "xi") {
    const Vec3 axes = cfg.vec3("fluctuation", "xi_axes", Vec3::Ones());
    const Vec3 xi = value * axes;
    cfg.set("fluctuation", "model", "thermal");
    cfg.erase("fluctuation", "x0");
    cfg.set("fluctuation", "xi", join_numbers({xi[0], xi[1], xi[2]}));
  } else if (variable == "U") {
    cfg.erase("rydberg", "u");
    cfg.set("rydberg", "u_over_omega_eff", format_double(value));
  } else {
    throw ConfigError(key_name("sweep", "variable") + ": expected N, d0_over_lambda, xi or U");
  }
  return cfg;
}

template <class T, class Fn>
std::vector<T> run_points(std::size_t n, int jobs, Fn&& fn) {
  std::vector<std::optional<T>> out(n);
  std::vector<std::exception_ptr> errs(n);
  std::size_t next = 0;
  while (next < n) {
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n - next);
    std::vector<std::future<void>> futures;
    for (std::size_t w = 0; w < count; ++w) {
      const std::size_t i = next + w;
      futures.push_back(std::async(count == 1 ? std::launch::deferred : std::launch::async,
                                   [&, i] {
                                     try {
                                       out[i] = fn(i);
                                     } catch (...) {
                                       errs[i] = std::current_exception();
                                     }
                                   }));
    }
    for (auto& f : futures) f.get();
    next += count;
  }
  std::vector<T> result;
  for (std::size_t i = 0; i < n; ++i) {
    if (errs[i]) std::rethrow_exception(errs[i]);
    result.push_back(std::move(*out[i]));
  }
  return result;
}

json fit_json(const std::vector<double>& x, const std::vector<double>& y, bool exclude_smallest) {
  for (double v : y)
    if (!(v > 0.0) || !std::isfinite(v)) return nullptr;
  const PowerLawFit f = fit_power_law(x, y, exclude_smallest);
  return {{"exponent", f.exponent},
          {"exponent_stderr", number_or_null(f.exponent_stderr)},
          {"prefactor", f.prefactor},
          {"n_points", f.n_points}};
}

}  // namespace

// ---------------------------------------------------------------- commands

void run_pattern(const Config& cfg, const GlobalOptions& opts, std::ostream& log) {
  const PatternRun run = evaluate_pattern(cfg, opts, opts.jobs);
  const int n_theta = static_cast<int>(cfg.integer("grid", "n_theta", 200));
  const int n_phi = static_cast<int>(cfg.integer("grid", "n_phi", 200));
  if (!run.drive.momentum_matched())
    log << "warning: |k_L + k0| differs from |k_L| by more than 1%\n";
  if (want_csv(opts) && cfg.flag("output", "write_pattern", true))
    write_text(output_path(opts, cfg.text("output", "pattern", "pattern.csv")), pattern_csv(run.pattern));
  if (want_json(opts))
    write_json(output_path(opts, cfg.text("output", "summary", "summary.json")),
               summary_json(run, n_theta, n_phi));

  log << "error probability: " << format_double(run.summary.error_probability) << '\n';
  log << "fwhm_rad: " << (run.summary.fwhm_rad ? format_double(*run.summary.fwhm_rad) : "none (" + run.fwhm_note + ")") << '\n';
  log << "gamma_k0 / gamma: " << (run.gamma_ratio ? format_double(*run.gamma_ratio) : "n/a") << '\n';
  if (cfg.has_section("dynamics")) run_dynamics(cfg, run, opts, log);
}

void run_sweep(const Config& cfg, const GlobalOptions& opts, std::ostream& log) {
  if (!cfg.has_section("sweep")) throw ConfigError("missing section [sweep]");
  const std::string variable = cfg.text("sweep", "variable");
  const std::vector<double> values = cfg.list("sweep", "values");
  if (values.empty()) throw ConfigError(key_name("sweep", "values") + " is empty");
  const std::string fit = cfg.text("sweep", "fit", "none");
  if (fit != "none" && fit != "powerlaw")
    throw ConfigError(key_name("sweep", "fit") + ": expected none or powerlaw");
  if (fit == "powerlaw" && values.size() < 3)
    throw ConfigError(key_name("sweep", "values") + ": a power-law fit needs at least three values");
  const bool exclude = cfg.flag("sweep", "exclude_smallest", true);

  // Validate all overrides before any work starts.
  std::vector<Config> point_cfgs;
  for (double v : values) point_cfgs.push_back(apply_sweep_value(cfg, variable, v));

  const int inner_jobs = values.size() > 1 ? 1 : opts.jobs;
  std::ostringstream os;
  json fits = json::object();
  if (variable == "U") {
    const auto runs = run_points<RydbergRun>(values.size(), opts.jobs,
                                             [&](std::size_t i) { return evaluate_rydberg(point_cfgs[i]); });
    CsvWriter w(os, {"value", "double_same_species_max", "target_fidelity", "mixed_pair_max"});
    std::vector<double> dss;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& r = runs[i].result;
      w.row({values[i], r.double_same_species_max, r.target_fidelity, r.mixed_pair_max});
      dss.push_back(r.double_same_species_max);
    }
    if (fit == "powerlaw") fits["double_same_species_max"] = fit_json(values, dss, exclude);
  } else {
    GlobalOptions inner = opts;
    inner.jobs = inner_jobs;
    const auto runs = run_points<std::array<double, 3>>(values.size(), opts.jobs, [&](std::size_t i) {
      const PatternRun r = evaluate_pattern(point_cfgs[i], inner, inner_jobs);
      const double nan = std::numeric_limits<double>::quiet_NaN();
      return std::array<double, 3>{r.summary.error_probability, r.summary.fwhm_rad.value_or(nan),
                                   r.gamma_ratio.value_or(nan)};
    });
    CsvWriter w(os, {"value", "error_probability", "fwhm_rad", "gamma_k0_over_gamma"});
    std::vector<double> err, width;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      w.row({values[i], runs[i][0], runs[i][1], runs[i][2]});
      err.push_back(runs[i][0]);
      width.push_back(runs[i][1]);
    }
    if (fit == "powerlaw") {
      fits["error_probability"] = fit_json(values, err, exclude);
      fits["fwhm_rad"] = fit_json(values, width, exclude);
    }
  }
  if (want_csv(opts)) write_text(output_path(opts, "sweep.csv"), os.str());
  if (fit == "powerlaw") {
    json j = {{"variable", variable}, {"exclude_smallest", exclude}, {"fits", fits}};
    if (want_json(opts)) write_json(output_path(opts, "sweep_fit.json"), j);
    for (const auto& [name, f] : fits.items()) {
      if (f.is_null()) {
        log << name << ": no fit (non-positive values)\n";
      } else {
        log << name << ": exponent " << format_double(f["exponent"].get<double>()) << " +/- "
            << (f["exponent_stderr"].is_null() ? std::string("n/a")
                                                : format_double(f["exponent_stderr"].get<double>()))
            << '\n';
      }
    }
  }
  log << "sweep over " << variable << ": " << values.size() << " points\n";
}

void run_states(const Config& cfg, const GlobalOptions& opts, std::ostream& log) {
  if (!cfg.has_section("states")) throw ConfigError("missing section [states]");
  const Scene sc = build_scene(cfg);
  const std::string kind = cfg.text("states", "kind", "w");
  const Vec3 k = kTwoPi * cfg.vec3("states", "k", Vec3::Zero());
  const Vec3 q = kTwoPi * cfg.vec3("states", "q", Vec3::Zero());
  CollectiveSpec spec;
  if (kind == "w") {
    spec = w_state_spec(k);
  } else if (kind == "two_spin_waves") {
    spec = two_spin_wave_spec(k, q);
  } else if (kind == "single") {
    spec.terms.push_back({{1.0, 0.0},
                          positive_int(cfg, "states", "n_a", 1, 0),
                          positive_int(cfg, "states", "n_b", 0, 0), k, q});
  } else {
    throw ConfigError(key_name("states", "kind") + ": expected w, two_spin_waves or single");
  }
  const double tol = cfg.has("states", "tolerance") ? positive(cfg, "states", "tolerance") : 1e-10;
  const DenseState state = build_collective_state(spec, sc.geom);
  if (state.n_sites < 2) throw ConfigError("Schmidt analysis needs at least two atoms");
  const SchmidtReport rep = schmidt_report(state, tol);
  const Mps mps = mps_from_dense(state, tol);
  const double recon = (mps.contract() - state.amplitudes).norm();
  const int bound = bond_dimension_bound(spec);

  json cuts = json::array();
  for (const auto& [pos, rank] : rep.cut_ranks) cuts.push_back({{"position", pos}, {"rank", rank}});
  json j = {{"cuts", cuts},
            {"max_rank", rep.max_rank},
            {"bound", bound},
            {"tolerance", tol},
            {"n_sites", state.n_sites},
            {"raw_norm", state.raw_norm},
            {"gate_qubits", gate_qubits(rep.max_rank)},
            {"mps_bond_dims", mps.bond_dims},
            {"mps_reconstruction_error", recon}};
  write_json(output_path(opts, "schmidt.json"), j);
  log << "max Schmidt rank: " << rep.max_rank << " (bound " << bound << ")\n";
}

void run_rydberg(const Config& cfg, const GlobalOptions& opts, std::ostream& log) {
  const RydbergRun run = evaluate_rydberg(cfg);
  if (!run.params.perturbative())
    log << "warning: parameters are outside the perturbative blockade regime\n";
  if (want_csv(opts)) {
    std::ostringstream os;
    CsvWriter w(os, {"t", "fidelity", "double_same_species", "norm_error"});
    for (const auto& s : run.result.samples) w.row({s.t, s.fidelity, s.double_same_species, s.norm_error});
    write_text(output_path(opts, "rydberg.csv"), os.str());
  }
  if (want_json(opts)) write_json(output_path(opts, "rydberg_summary.json"), rydberg_json(run));
  log << "effective Rabi frequency: " << format_double(run.result.effective_rabi) << '\n'
      << "max double same-species population: " << format_double(run.result.double_same_species_max) << '\n'
      << "peak target fidelity: " << format_double(run.result.target_fidelity) << " at t = "
      << format_double(run.result.best_time) << '\n';
}

void run_chain(const Config& cfg, const GlobalOptions& opts, std::ostream& log) {
  if (!cfg.has_section("chain")) throw ConfigError("missing section [chain]");
  TrapParams tp;
  tp.n_ions = positive_int(cfg, "chain", "n", 0);
  if (cfg.has("chain", "tolerance")) tp.tolerance = positive(cfg, "chain", "tolerance");
  const AtomGeometry unit = solve_coulomb_chain(tp);
  std::vector<double> u;
  for (const auto& r : unit.positions) u.push_back(r[0]);
  const double residual = coulomb_force_residual(u);

  AtomGeometry geom = unit;
  if (cfg.has("chain", "mean_spacing")) {
    if (cfg.has("chain", "length_scale"))
      throw ConfigError(key_name("chain", "mean_spacing") + " conflicts with length_scale");
    geom = rescale_to_spacing(unit, positive(cfg, "chain", "mean_spacing"));
  } else if (cfg.has("chain", "length_scale")) {
    const double s = positive(cfg, "chain", "length_scale");
    for (auto& r : geom.positions) r *= s;
  }
  std::ostringstream os;
  write_geometry(os, geom);
  write_text(output_path(opts, "chain.txt"), os.str());
  if (want_json(opts)) {
    std::vector<double> x;
    for (const auto& r : geom.positions) x.push_back(r[0]);
    json j = {{"n_ions", tp.n_ions}, {"force_residual", residual}, {"positions", x}};
    j["average_spacing"] = geom.size() >= 2 ? json(average_spacing(geom)) : json(nullptr);
    write_json(output_path(opts, "chain.json"), j);
  }
  log << "Coulomb chain, " << tp.n_ions << " ions, force residual " << format_double(residual) << '\n';
}

}  // namespace collemit::cli
