#pragma once

#include "sdecay/geometry.hpp"
#include "sdecay/projection.hpp"
#include "sdecay/spectral.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sdecay {

/// Quadrature settings for the pointwise generator.
struct GeneratorQuad {
  double r_split = 0.0;              // 0: half of min(smoothness radius, 1)
  int radial_nodes = 512;            // radial panel budget per ray (15 nodes per panel), >= 128
  double outer_cutoff = 1e3;         // radius beyond which the ray tail is closed form or bounded
  double tol = 1e-7;                 // error target, relative to 1 + ∫ϑ|ray integral|
  double compensation_radius = 1.0;  // alpha = 1: radius of the truncated gradient compensator
  int inner_levels = 10;             // dyadic levels between the analytic core and r_split
  int angular_panels = 16;           // initial angular panels (d = 2) / polar panels (d = 3)
  int max_angular_panels = 2000;
  bool adaptive = true;              // false: fixed panels, exactly linear in f

  void validate() const;
  nlohmann::json to_json() const;
  static GeneratorQuad from_json(const nlohmann::json& j);
};

struct RayTail {
  double value = 0.0;
  double error = 0.0;
};

/// Function handed to the generator. Implementations are immutable and thread-safe.
class TestFunction {
 public:
  virtual ~TestFunction() = default;
  virtual int dim() const = 0;
  virtual std::string kind() const = 0;
  virtual double value(const Vec& y) const = 0;
  /// Analytic where the kind provides it, central differences otherwise.
  virtual Vec gradient(const Vec& x) const;
  /// Radius of a ball around x on which f is smooth; 0 where it is not differentiable.
  virtual double smoothness_radius(const Vec& x) const = 0;
  /// sup |f|; infinity for unbounded kinds.
  virtual double bound() const = 0;
  /// f(y) = O(|y|^p) at infinity; must stay below alpha.
  virtual double growth_exponent() const { return 0.0; }
  /// Radii in (lo, hi) along x + r w where f is not smooth.
  virtual std::vector<double> ray_breakpoints(const Vec& x, const Vec& w, double lo, double hi) const;
  /// ∫_R^∞ f(x + r w) r^{-1-alpha} dr. Default: zero with error sup|f| R^{-alpha} / alpha.
  virtual RayTail ray_tail(const Vec& x, const Vec& w, double R, double alpha) const;
  /// Directions where the ray integral is not smooth: angles for d = 2, polar angles about
  /// pole(x) for d = 3.
  virtual std::vector<double> angular_breaks(const Vec& x) const;
  virtual std::optional<Vec> pole(const Vec& x) const;
};

using TestFunctionPtr = std::shared_ptr<const TestFunction>;

TestFunctionPtr make_constant_function(int dim, double c);

/// y -> <y - z, u>_+^p, the power of the distance to the half-space {<y - z, u> > 0}.
TestFunctionPtr make_halfspace_power(const Vec& z, const Vec& u, double p);

/// y -> δ_D(y)^{p(n(y))} on {0 < δ_D < cut}, 0 elsewhere; n(y) is the inward normal at the
/// nearest boundary point. Requires cut < collar.
TestFunctionPtr make_boundary_power(DomainPtr dom, std::shared_ptr<const ExponentField> exponent, double cut = 1.0);

/// y -> amplitude exp(-(y - c)^T M (y - c)), M symmetric positive definite.
TestFunctionPtr make_gaussian_bump(const Vec& center, const Mat& m, double amplitude = 1.0);

TestFunctionPtr make_linear_combination(std::vector<std::pair<double, TestFunctionPtr>> terms);

struct CustomFunction {
  int dim = 2;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;  // optional
  double bound = std::numeric_limits<double>::infinity();
  double smoothness_radius = std::numeric_limits<double>::infinity();
  std::function<RayTail(const Vec& x, const Vec& w, double R, double alpha)> tail;  // optional
};

TestFunctionPtr make_custom_function(CustomFunction spec);

struct GeneratorValue {
  double value = 0.0;
  double err_estimate = 0.0;
  double scale = 0.0;  // ∫ϑ|ray integral|, the magnitude the tolerance is relative to
  long rays = 0;
};

/// Pointwise generator 𝒜f(x) in polar coordinates around x: for every direction w the
/// radial integral of f(x + r w) - f(x) - compensator against r^{-1-alpha}, weighted by ϑ(w).
GeneratorValue apply_generator(const StableSpec& spec, const TestFunction& f, const Vec& x,
                               const GeneratorQuad& quad = {});

struct HarmonicityScan {
  double exponent = 0.0;
  std::vector<Vec> points;
  std::vector<GeneratorValue> values;
  double max_abs = 0.0;
  double threshold = 0.0;  // 10 x summed error estimates
  bool passed() const { return max_abs <= threshold; }
};

/// 𝒜h at each point for h(y) = <y, u>_+^p. The default exponent is decay_exponent(spec, u),
/// for which h is harmonic on the half-space.
HarmonicityScan halfspace_harmonicity_scan(const StableSpec& spec, const Vec& u, const std::vector<Vec>& points,
                                           const GeneratorQuad& quad = {},
                                           std::optional<double> exponent = std::nullopt);

struct BoundednessScan {
  std::vector<double> deltas;
  std::vector<GeneratorValue> values;
  double slope = 0.0;  // least-squares slope of log|𝒜g| against log δ
  BoundaryFrame frame;
};

/// 𝒜g at x_δ = δ e_d in the normalized frame at the boundary point z. The exponent field is
/// read in local coordinates; nullptr means the decay exponent field of the rotated spec.
BoundednessScan g_boundedness_scan(const StableSpec& spec, DomainPtr dom, const Vec& z,
                                   const std::vector<double>& deltas, const GeneratorQuad& quad = {},
                                   std::shared_ptr<const ExponentField> exponent = nullptr);

/// Ordinary least-squares slope of log|y| against log x.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace sdecay
