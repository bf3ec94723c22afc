#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "collemit/geometry.hpp"
#include "collemit/quadrature.hpp"
#include "collemit/types.hpp"

namespace collemit {

/// Read-out drive and collective-state parameters. Lengths in wavelengths,
/// wavevectors in radians per wavelength.
struct EmissionConfig {
  Vec3 k_laser = kTwoPi * Vec3::UnitX();
  Vec3 k0 = Vec3::Zero();
  Vec3 dipole = Vec3::UnitZ();
  double gamma = 1.0;

  /// Laser along `direction` with |k_L| = 2 pi / wavelength; dipole chosen
  /// perpendicular to the laser.
  static EmissionConfig along(const Vec3& direction, double wavelength = 1.0);

  double wavenumber() const { return k_laser.norm(); }
  double wavelength() const { return kTwoPi / k_laser.norm(); }
  Vec3 forward() const { return k_laser + k0; }

  /// | |k_L + k0| - k_L | / k_L <= tol. A violation is a warning, not an error.
  bool momentum_matched(double tol = 0.01) const;
  void validate() const;
};

struct PatternValue {
  double coh = 0.0;
  double inc = 0.0;
  double total() const { return coh + inc; }
};

/// Sampled pattern f = f_coh + f_inc on a quadrature grid.
struct EmissionPattern {
  AngularGrid grid;
  std::vector<double> f_coh;
  std::vector<double> f_inc;
  /// Per-node standard error of f_total; Monte Carlo patterns only.
  std::optional<std::vector<double>> stderr_total;

  std::size_t size() const { return f_coh.size(); }
  double total(std::size_t i) const { return f_coh[i] + f_inc[i]; }
};

struct EmissionSummary {
  double error_probability = 0.0;
  std::optional<double> fwhm_rad;
  Vec3 peak_direction = Vec3::UnitX();
  double peak_value = 0.0;
};

/// A pattern that can be evaluated in any direction. Closed forms and the
/// direct position sum share this interface so that peak search and width
/// scans refine beyond the quadrature grid.
class PatternModel {
 public:
  virtual ~PatternModel() = default;
  virtual PatternValue at(const Vec3& n) const = 0;
  virtual void evaluate(std::span<const Vec3> dirs, std::span<PatternValue> out) const;
  virtual std::size_t n_atoms() const = 0;

  EmissionPattern sample(const AngularGrid& grid) const;
};

/// sin^2(n x) / sin^2(x), with the limit n^2 (1 - (n^2-1) y^2 / 3) near x = m pi.
double interference_factor(double x, int n);

/// Fixed lattice, closed-form product of per-axis interference factors.
class LatticePattern : public PatternModel {
 public:
  LatticePattern(const EmissionConfig& cfg, std::array<int, 3> dims, double d0);
  PatternValue at(const Vec3& n) const override;
  std::size_t n_atoms() const override;
  double f0(const Vec3& n) const;

 private:
  EmissionConfig cfg_;
  std::array<int, 3> dims_;
  double d0_;
};

/// Lattice with independent Gaussian position fluctuations of width xi.
class ThermalPattern : public PatternModel {
 public:
  ThermalPattern(const EmissionConfig& cfg, std::array<int, 3> dims, double d0, const Vec3& xi);
  PatternValue at(const Vec3& n) const override;
  std::size_t n_atoms() const override { return lattice_.n_atoms(); }
  double g_thermal(const Vec3& n) const;

 private:
  LatticePattern lattice_;
  EmissionConfig cfg_;
  Vec3 xi_;
};

/// Atoms uniformly distributed in a box. Uses the characteristic function of
/// the uniform distribution, sinc(q L / 2) per axis.
class BoxPattern : public PatternModel {
 public:
  BoxPattern(const EmissionConfig& cfg, std::size_t n_atoms, const Vec3& box);
  PatternValue at(const Vec3& n) const override;
  std::size_t n_atoms() const override { return n_; }
  double g_box(const Vec3& n) const;

 private:
  EmissionConfig cfg_;
  std::size_t n_;
  Vec3 box_;
};

/// Direct double sum over atom pairs, averaged over position samples.
/// For fixed positions the sum is exact; otherwise the average is the
/// empirical mean over `n_samples` draws and the coherent part is the
/// squared mean amplitude (bias-corrected).
class DirectPattern : public PatternModel {
 public:
  DirectPattern(const AtomGeometry& geom, FluctuationModel model, const EmissionConfig& cfg,
                std::uint64_t seed = 0, std::size_t n_samples = 1, int jobs = 1);

  PatternValue at(const Vec3& n) const override;
  void evaluate(std::span<const Vec3> dirs, std::span<PatternValue> out) const override;
  std::size_t n_atoms() const override { return geom_.size(); }

  /// Full evaluation including per-node standard errors of f_total.
  void evaluate_with_errors(std::span<const Vec3> dirs, std::span<PatternValue> out,
                            std::span<double> stderr_total) const;

 private:
  AtomGeometry geom_;
  FluctuationModel model_;
  EmissionConfig cfg_;
  std::uint64_t seed_;
  std::size_t n_samples_;
  int jobs_;
  /// Pre-drawn samples, shared between copies; empty when too large to hold.
  std::shared_ptr<const std::vector<std::vector<Vec3>>> samples_;
};

EmissionPattern f_direct(const AtomGeometry& geom, const FluctuationModel& model,
                         const EmissionConfig& cfg, const AngularGrid& grid, std::uint64_t seed,
                         std::size_t n_samples, int jobs = 1);
EmissionPattern f0_lattice(const EmissionConfig& cfg, std::array<int, 3> dims, double d0,
                           const AngularGrid& grid);
EmissionPattern f_thermal(const EmissionConfig& cfg, std::array<int, 3> dims, double d0,
                          const Vec3& xi, const AngularGrid& grid);
EmissionPattern f_box(const EmissionConfig& cfg, std::size_t n_atoms, const Vec3& box,
                      const AngularGrid& grid);

/// Thermal fluctuation size x0 * sqrt(1 + 2 n_T), componentwise.
Vec3 xi_thermal(const Vec3& x0, const Vec3& n_thermal);

/// Fraction of the emission in the incoherent channel, by grid quadrature.
double error_probability(const EmissionPattern& p);

struct Peak {
  Vec3 direction;
  double value;
};

/// Maximum of f_coh: best grid node, then refined by a pattern search on the sphere.
Peak locate_peak(const PatternModel& model, const EmissionPattern& p);

/// Full width at half maximum of f_coh along a great circle through the peak.
/// Throws NoPeakError when the pattern is flat.
double angular_width(const PatternModel& model, const EmissionPattern& p);

EmissionSummary summarize(const PatternModel& model, const EmissionPattern& p);

double multiphoton_error_bound(double err, int n_a, int n_b);

/// (3 / 8 pi) (Gamma / Gamma_k0) (1 - (n_eg . n)^2) at each grid node.
std::vector<double> dipole_pattern(const EmissionConfig& cfg, double gamma_k0,
                                   const AngularGrid& grid);

/// f_total sampled along the great circle from `start` towards `towards`,
/// angles [0, span_rad].
std::vector<double> great_circle_scan(const PatternModel& model, const Vec3& start,
                                      const Vec3& towards, double span_rad, int n_points);

/// Local maxima (endpoints included) exceeding `rel_threshold` of the global maximum.
std::vector<std::size_t> find_maxima(std::span<const double> values, double rel_threshold);

}  // namespace collemit
