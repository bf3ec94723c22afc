#include "collemit/emission.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "collemit/errors.hpp"

namespace collemit {

EmissionConfig EmissionConfig::along(const Vec3& direction, double wavelength) {
  if (!(direction.norm() > 0.0)) throw InvalidArgument("laser direction must be nonzero");
  if (!(wavelength > 0.0)) throw InvalidArgument("wavelength must be > 0");
  EmissionConfig cfg;
  cfg.k_laser = (kTwoPi / wavelength) * direction.normalized();
  cfg.dipole = Frame::around(direction).e1;
  return cfg;
}

bool EmissionConfig::momentum_matched(double tol) const {
  const double k = wavenumber();
  return std::abs(forward().norm() - k) / k <= tol;
}

void EmissionConfig::validate() const {
  if (!(k_laser.norm() > 0.0) || !k_laser.allFinite())
    throw InvalidArgument("laser wavevector must be nonzero and finite");
  if (!k0.allFinite()) throw InvalidArgument("k0 must be finite");
  if (std::abs(dipole.norm() - 1.0) > 1e-12) throw InvalidArgument("dipole orientation must be a unit vector");
  if (!(gamma > 0.0)) throw InvalidArgument("single-atom decay rate must be > 0");
}

void PatternModel::evaluate(std::span<const Vec3> dirs, std::span<PatternValue> out) const {
  if (dirs.size() != out.size()) throw InvalidArgument("direction and output sizes differ");
  for (std::size_t i = 0; i < dirs.size(); ++i) out[i] = at(dirs[i]);
}

EmissionPattern PatternModel::sample(const AngularGrid& grid) const {
  std::vector<PatternValue> values(grid.size());
  evaluate(grid.nodes, values);
  EmissionPattern p;
  p.grid = grid;
  p.f_coh.resize(values.size());
  p.f_inc.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    p.f_coh[i] = values[i].coh;
    p.f_inc[i] = values[i].inc;
  }
  return p;
}

double interference_factor(double x, int n) {
  // Period pi: reduce first so that sin(n y) keeps its digits near x = m pi.
  const double y = x - std::round(x / kPi) * kPi;
  const double n2 = static_cast<double>(n) * n;
  const double s = std::sin(y);
  if (std::abs(s) < 1e-8) return n2 * (1.0 - (n2 - 1.0) * y * y / 3.0);
  const double t = std::sin(n * y);
  return t * t / (s * s);
}

// ---------------------------------------------------------------- lattice

LatticePattern::LatticePattern(const EmissionConfig& cfg, std::array<int, 3> dims, double d0)
    : cfg_(cfg), dims_(dims), d0_(d0) {
  cfg_.validate();
  for (int n : dims)
    if (n < 1) throw InvalidArgument("lattice dimensions must be >= 1");
  if (!(d0 > 0.0)) throw InvalidArgument("lattice spacing must be > 0");
}

std::size_t LatticePattern::n_atoms() const {
  return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
}

double LatticePattern::f0(const Vec3& n) const {
  const Vec3 q = cfg_.wavenumber() * n - cfg_.forward();
  double f = 1.0;
  for (int a = 0; a < 3; ++a) f *= interference_factor(0.5 * q[a] * d0_, dims_[a]);
  return f / static_cast<double>(n_atoms());
}

PatternValue LatticePattern::at(const Vec3& n) const { return {f0(n), 0.0}; }

// ---------------------------------------------------------------- thermal

ThermalPattern::ThermalPattern(const EmissionConfig& cfg, std::array<int, 3> dims, double d0,
                               const Vec3& xi)
    : lattice_(cfg, dims, d0), cfg_(cfg), xi_(xi) {
  validate(ThermalFluctuation{xi});
}

double ThermalPattern::g_thermal(const Vec3& n) const {
  const Vec3 q = cfg_.wavenumber() * n - cfg_.k_laser;
  return std::exp(-q.cwiseProduct(xi_).squaredNorm());
}

PatternValue ThermalPattern::at(const Vec3& n) const {
  const double g = g_thermal(n);
  return {lattice_.f0(n) * g, 1.0 - g};
}

// ---------------------------------------------------------------- box

BoxPattern::BoxPattern(const EmissionConfig& cfg, std::size_t n_atoms, const Vec3& box)
    : cfg_(cfg), n_(n_atoms), box_(box) {
  cfg_.validate();
  if (n_atoms < 1) throw InvalidArgument("box ensemble needs at least one atom");
  validate(BoxDistribution{box});
}

double BoxPattern::g_box(const Vec3& n) const {
  const Vec3 q = cfg_.wavenumber() * n - cfg_.k_laser;
  double g = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double s = sinc(0.5 * q[a] * box_[a]);
    g *= s * s;
  }
  return g;
}

PatternValue BoxPattern::at(const Vec3& n) const {
  const double g = g_box(n);
  return {static_cast<double>(n_) * g, 1.0 - g};
}

// ---------------------------------------------------------------- direct sum

namespace {

// Running mean and sum of squared deviations (Welford), mergeable with
// Chan's formula so that block partial results combine deterministically.
struct NodeMoments {
  double count = 0.0;
  Complex mean_amp{0.0, 0.0};
  double m2_amp = 0.0;
  double mean_int = 0.0;
  double m2_int = 0.0;

  void push(Complex a) {
    count += 1.0;
    const Complex da = a - mean_amp;
    mean_amp += da / count;
    m2_amp += std::real(da * std::conj(a - mean_amp));
    const double x = std::norm(a);
    const double dx = x - mean_int;
    mean_int += dx / count;
    m2_int += dx * (x - mean_int);
  }

  void merge(const NodeMoments& o) {
    if (o.count == 0.0) return;
    if (count == 0.0) {
      *this = o;
      return;
    }
    const double n = count + o.count;
    const Complex da = o.mean_amp - mean_amp;
    mean_amp += da * (o.count / n);
    m2_amp += o.m2_amp + std::norm(da) * count * o.count / n;
    const double dx = o.mean_int - mean_int;
    mean_int += dx * (o.count / n);
    m2_int += o.m2_int + dx * dx * count * o.count / n;
    count = n;
  }
};

constexpr std::size_t kSamplesPerBlock = 256;
// Largest number of sampled positions kept in memory (about 240 MB).
constexpr std::size_t kMaxCachedPositions = 10'000'000;

// Runs fn(block) for every block, `jobs` at a time, then merge(block) in block order.
template <class Fn, class Merge>
void for_blocks(std::size_t n_blocks, int jobs, Fn&& fn, Merge&& merge) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(jobs, n_blocks));
  for (std::size_t wave = 0; wave < n_blocks; wave += workers) {
    const std::size_t count = std::min(workers, n_blocks - wave);
    if (count == 1) {
      fn(wave, 0);
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(count);
      for (std::size_t w = 0; w < count; ++w) pool.emplace_back([&, w] { fn(wave + w, w); });
    }
    for (std::size_t w = 0; w < count; ++w) merge(wave + w, w);
  }
}

}  // namespace

DirectPattern::DirectPattern(const AtomGeometry& geom, FluctuationModel model,
                             const EmissionConfig& cfg, std::uint64_t seed, std::size_t n_samples,
                             int jobs)
    : geom_(geom), model_(std::move(model)), cfg_(cfg), seed_(seed), n_samples_(n_samples),
      jobs_(std::max(1, jobs)) {
  if (geom_.empty()) throw InvalidArgument("geometry has no atoms");
  cfg_.validate();
  validate(model_);
  if (is_fixed(model_)) {
    n_samples_ = 1;
    return;
  }
  if (n_samples_ < 100) throw InvalidArgument("fluctuating positions need at least 100 samples");
  if (n_samples_ * geom_.size() <= kMaxCachedPositions) {
    auto cache = std::make_shared<std::vector<std::vector<Vec3>>>(n_samples_);
    const PositionSampler sampler(geom_, model_, seed_);
    const std::size_t n_blocks = (n_samples_ + kSamplesPerBlock - 1) / kSamplesPerBlock;
    for_blocks(
        n_blocks, jobs_,
        [&](std::size_t b, std::size_t) {
          const std::size_t last = std::min(n_samples_, (b + 1) * kSamplesPerBlock);
          for (std::size_t s = b * kSamplesPerBlock; s < last; ++s) sampler.sample(s, (*cache)[s]);
        },
        [](std::size_t, std::size_t) {});
    samples_ = std::move(cache);
  }
}

PatternValue DirectPattern::at(const Vec3& n) const {
  PatternValue v;
  evaluate(std::span<const Vec3>(&n, 1), std::span<PatternValue>(&v, 1));
  return v;
}

void DirectPattern::evaluate(std::span<const Vec3> dirs, std::span<PatternValue> out) const {
  std::vector<double> se(dirs.size());
  evaluate_with_errors(dirs, out, se);
}

void DirectPattern::evaluate_with_errors(std::span<const Vec3> dirs, std::span<PatternValue> out,
                                         std::span<double> stderr_total) const {
  if (dirs.size() != out.size() || dirs.size() != stderr_total.size())
    throw InvalidArgument("direction and output sizes differ");
  const std::size_t n_atoms = geom_.size();
  const double inv_n = 1.0 / static_cast<double>(n_atoms);
  const double k = cfg_.wavenumber();

  std::vector<double> spin_phase(n_atoms);
  for (std::size_t j = 0; j < n_atoms; ++j) spin_phase[j] = cfg_.k0.dot(geom_.positions[j]);

  std::vector<Vec3> dq(dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) dq[i] = k * dirs[i] - cfg_.k_laser;

  auto amplitude = [&](const Vec3& q, const std::vector<Vec3>& r) {
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < n_atoms; ++j) {
      const double ph = spin_phase[j] - q.dot(r[j]);
      re += std::cos(ph);
      im += std::sin(ph);
    }
    return Complex(re, im);
  };

  if (is_fixed(model_)) {
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      out[i] = {std::norm(amplitude(dq[i], geom_.positions)) * inv_n, 0.0};
      stderr_total[i] = 0.0;
    }
    return;
  }

  const PositionSampler sampler(geom_, model_, seed_);
  const std::size_t n_blocks = (n_samples_ + kSamplesPerBlock - 1) / kSamplesPerBlock;

  auto run_block = [&](std::size_t b, std::vector<NodeMoments>& acc) {
    acc.assign(dirs.size(), NodeMoments{});
    std::vector<Vec3> drawn;
    const std::size_t first = b * kSamplesPerBlock;
    const std::size_t last = std::min(n_samples_, first + kSamplesPerBlock);
    for (std::size_t s = first; s < last; ++s) {
      const std::vector<Vec3>* r = &drawn;
      if (samples_) r = &(*samples_)[s];
      else sampler.sample(s, drawn);
      for (std::size_t i = 0; i < dirs.size(); ++i) acc[i].push(amplitude(dq[i], *r));
    }
  };

  std::vector<NodeMoments> total(dirs.size());
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs_), n_blocks);
  std::vector<std::vector<NodeMoments>> partial(std::max<std::size_t>(workers, 1));
  // Merged strictly in block order so the result does not depend on `jobs`.
  for_blocks(
      n_blocks, jobs_, [&](std::size_t b, std::size_t w) { run_block(b, partial[w]); },
      [&](std::size_t, std::size_t w) {
        for (std::size_t i = 0; i < dirs.size(); ++i) total[i].merge(partial[w][i]);
      });

  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const NodeMoments& m = total[i];
    const double s = m.count;
    const double var_amp = m.m2_amp / (s - 1.0);
    const double var_int = m.m2_int / (s - 1.0);
    const double f = m.mean_int * inv_n;
    const double coh = std::max(0.0, std::norm(m.mean_amp) - var_amp / s) * inv_n;
    out[i] = {coh, std::max(0.0, f - coh)};
    stderr_total[i] = std::sqrt(var_int / s) * inv_n;
  }
}

// ---------------------------------------------------------------- patterns

EmissionPattern f_direct(const AtomGeometry& geom, const FluctuationModel& model,
                         const EmissionConfig& cfg, const AngularGrid& grid, std::uint64_t seed,
                         std::size_t n_samples, int jobs) {
  const DirectPattern direct(geom, model, cfg, seed, n_samples, jobs);
  std::vector<PatternValue> values(grid.size());
  std::vector<double> se(grid.size());
  direct.evaluate_with_errors(grid.nodes, values, se);
  EmissionPattern p;
  p.grid = grid;
  p.f_coh.resize(grid.size());
  p.f_inc.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    p.f_coh[i] = values[i].coh;
    p.f_inc[i] = values[i].inc;
  }
  if (!is_fixed(model)) p.stderr_total = std::move(se);
  return p;
}

EmissionPattern f0_lattice(const EmissionConfig& cfg, std::array<int, 3> dims, double d0,
                           const AngularGrid& grid) {
  return LatticePattern(cfg, dims, d0).sample(grid);
}

EmissionPattern f_thermal(const EmissionConfig& cfg, std::array<int, 3> dims, double d0,
                          const Vec3& xi, const AngularGrid& grid) {
  return ThermalPattern(cfg, dims, d0, xi).sample(grid);
}

EmissionPattern f_box(const EmissionConfig& cfg, std::size_t n_atoms, const Vec3& box,
                      const AngularGrid& grid) {
  return BoxPattern(cfg, n_atoms, box).sample(grid);
}

Vec3 xi_thermal(const Vec3& x0, const Vec3& n_thermal) {
  if ((x0.array() < 0.0).any()) throw InvalidArgument("ground-state size must be >= 0");
  if ((n_thermal.array() < 0.0).any()) throw InvalidArgument("thermal occupation must be >= 0");
  return x0.cwiseProduct((1.0 + 2.0 * n_thermal.array()).sqrt().matrix());
}

// ---------------------------------------------------------------- figures of merit

double error_probability(const EmissionPattern& p) {
  if (p.f_coh.size() != p.grid.size() || p.f_inc.size() != p.grid.size())
    throw InvalidArgument("pattern components are not populated on the grid");
  const double inc = p.grid.integrate(p.f_inc);
  const double coh = p.grid.integrate(p.f_coh);
  const double total = inc + coh;
  if (!(total > 0.0)) throw InvalidArgument("pattern integrates to zero");
  return std::clamp(inc / total, 0.0, 1.0);
}

namespace {

Vec3 rotate_towards(const Vec3& p, const Vec3& t, double angle) {
  return (std::cos(angle) * p + std::sin(angle) * t).normalized();
}

double grid_step(const EmissionPattern& p) {
  return std::sqrt(4.0 * kPi / static_cast<double>(std::max<std::size_t>(p.grid.size(), 1)));
}

}  // namespace

Peak locate_peak(const PatternModel& model, const EmissionPattern& p) {
  if (p.f_coh.empty()) throw InvalidArgument("empty pattern");
  const auto it = std::max_element(p.f_coh.begin(), p.f_coh.end());
  Vec3 best = p.grid.nodes[static_cast<std::size_t>(it - p.f_coh.begin())];
  double best_val = model.at(best).coh;

  double h = grid_step(p);
  for (int iter = 0; iter < 20000 && h > 1e-9; ++iter) {
    const Frame f = Frame::around(best);
    const std::array<Vec3, 8> moves = {f.e1, -f.e1, f.e2, -f.e2,
                                       (f.e1 + f.e2).normalized(), (f.e1 - f.e2).normalized(),
                                       (-f.e1 + f.e2).normalized(), (-f.e1 - f.e2).normalized()};
    bool improved = false;
    for (const auto& t : moves) {
      const Vec3 trial = rotate_towards(best, t, h);
      const double v = model.at(trial).coh;
      if (v > best_val) {
        best_val = v;
        best = trial;
        improved = true;
      }
    }
    if (!improved) h *= 0.5;
  }
  return {best, best_val};
}

double angular_width(const PatternModel& model, const EmissionPattern& p) {
  const Peak peak = locate_peak(model, p);
  const double mean = p.grid.integrate(p.f_coh) / (4.0 * kPi);
  if (!(peak.value > mean * (1.0 + 1e-9)))
    throw NoPeakError("coherent pattern has no peak above its mean");

  const double half = 0.5 * peak.value;
  const Vec3 t = Frame::around(peak.direction).e1;

  auto crossing = [&](double sign, double step) -> std::optional<double> {
    auto f = [&](double a) { return model.at(rotate_towards(peak.direction, sign * t, a)).coh; };
    double lo = 0.0;
    for (double a = step; a <= kPi + 1e-12; a += step) {
      if (f(a) < half) {
        double hi = a;
        while (hi - lo > 1e-11) {
          const double mid = 0.5 * (lo + hi);
          (f(mid) < half ? hi : lo) = mid;
        }
        return 0.5 * (lo + hi);
      }
      lo = a;
    }
    return std::nullopt;
  };

  double step = 0.25 * grid_step(p);
  for (int pass = 0; pass < 8; ++pass) {
    const auto up = crossing(+1.0, step);
    const auto down = crossing(-1.0, step);
    if (!up || !down) throw NoPeakError("coherent pattern never falls to half maximum");
    const double width = *up + *down;
    if (step <= width / 50.0) return std::min(width, kPi);
    step = width / 100.0;
  }
  throw NoPeakError("width scan did not settle");
}

EmissionSummary summarize(const PatternModel& model, const EmissionPattern& p) {
  EmissionSummary s;
  s.error_probability = error_probability(p);
  const Peak peak = locate_peak(model, p);
  s.peak_direction = peak.direction;
  s.peak_value = peak.value;
  try {
    s.fwhm_rad = angular_width(model, p);
  } catch (const NoPeakError&) {
    s.fwhm_rad.reset();
  }
  return s;
}

double multiphoton_error_bound(double err, int n_a, int n_b) {
  if (!(err >= 0.0 && err <= 1.0)) throw InvalidArgument("error probability must lie in [0, 1]");
  if (n_a < 0 || n_b < 0) throw InvalidArgument("photon numbers must be >= 0");
  return 1.0 - std::pow(1.0 - err, n_a + n_b);
}

std::vector<double> dipole_pattern(const EmissionConfig& cfg, double gamma_k0,
                                   const AngularGrid& grid) {
  if (!(gamma_k0 > 0.0)) throw InvalidArgument("collective rate must be > 0");
  const double pref = 3.0 / (8.0 * kPi) * cfg.gamma / gamma_k0;
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double c = cfg.dipole.dot(grid.nodes[i]);
    out[i] = pref * (1.0 - c * c);
  }
  return out;
}

std::vector<double> great_circle_scan(const PatternModel& model, const Vec3& start,
                                      const Vec3& towards, double span_rad, int n_points) {
  if (n_points < 2) throw InvalidArgument("scan needs at least two points");
  const Vec3 s = start.normalized();
  const Vec3 t = (towards - towards.dot(s) * s).normalized();
  std::vector<Vec3> dirs(n_points);
  for (int i = 0; i < n_points; ++i) {
    const double a = span_rad * i / (n_points - 1);
    dirs[i] = std::cos(a) * s + std::sin(a) * t;
  }
  std::vector<PatternValue> v(dirs.size());
  model.evaluate(dirs, v);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i].total();
  return out;
}

std::vector<std::size_t> find_maxima(std::span<const double> values, double rel_threshold) {
  std::vector<std::size_t> out;
  if (values.empty()) return out;
  const double top = *std::max_element(values.begin(), values.end());
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double left = i > 0 ? values[i - 1] : -inf;
    const double right = i + 1 < values.size() ? values[i + 1] : -inf;
    if (values[i] > left && values[i] >= right && values[i] > rel_threshold * top) out.push_back(i);
  }
  return out;
}

}  // namespace collemit
