#pragma once

#include "sdecay/spectral.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace sdecay {

/// Hemisphere quadrature settings.
struct QuadConfig {
  double tol = 1e-9;           // relative error target for closed-form densities
  double tabulated_tol = 1e-6; // relaxed target for tabulated densities
  int panels = 8;              // uniform Gauss-Legendre panels away from the equator (16 nodes each)
  int grading_levels = 40;     // geometric refinements toward the equator
  int max_refinements = 5;     // panel doublings before giving up
  int azimuth_nodes = 64;      // d = 3 periodic trapezoid
  int qmc_points = 8192;       // d >= 4, points per random shift
  int qmc_shifts = 16;
  std::uint64_t qmc_seed = 0x5eed;

  nlohmann::json to_json() const;
  static QuadConfig from_json(const nlohmann::json& j);
};

struct HemisphereIntegral {
  double value = 0.0;
  double error = 0.0;  // absolute; standard error for d >= 4
};

/// ∫_{<u,w> > 0} ϑ(w) <u,w>^p dw.
HemisphereIntegral hemisphere_integral(const SphericalDensity& theta, double p, const Vec& u, const QuadConfig& quad);

double c_plus(const StableSpec& spec, const Vec& u, const QuadConfig& quad = {});
double c_minus(const StableSpec& spec, const Vec& u, const QuadConfig& quad = {});

/// Positivity exponent from the projected constants. For alpha != 1 the skewness form;
/// for alpha = 1 (c_plus = c_minus = C) the drifted Cauchy form 1/2 + arctan(b / (pi C)) / pi.
double beta_from_constants(double alpha, double c_plus, double c_minus, double drift_b = 0.0);

/// d beta / d rho where rho = (C+ - C-)/(C+ + C-), alpha != 1.
double dbeta_drho(double alpha, double rho);

struct DirectionalLaw {
  Vec u;
  double c_plus = 0.0;
  double c_minus = 0.0;
  double beta = 0.0;
  std::optional<double> drift_b;
  double c_plus_err = 0.0;
  double c_minus_err = 0.0;
  double beta_err = 0.0;
};

DirectionalLaw directional_law(const StableSpec& spec, const Vec& u, const QuadConfig& quad = {});
double beta(const StableSpec& spec, const Vec& u, const QuadConfig& quad = {});

/// Boundary decay exponent for a half-space with inward unit normal n: the function
/// x -> <x, n>_+^p is harmonic for X on the half-space exactly when p = alpha P(<X_1, n> < 0),
/// i.e. p = beta(-n), the positivity exponent of the dual process along n.
double decay_exponent(const StableSpec& spec, const Vec& inward_normal, const QuadConfig& quad = {});

struct BetaBounds {
  double beta_min = 0.0;
  double beta_max = 0.0;
  Vec argmin_u;
  Vec argmax_u;
};

BetaBounds beta_bounds(const StableSpec& spec, const QuadConfig& quad, int n_dirs);

/// C+(u) z^{-1-alpha} for z > 0, C-(u) |z|^{-1-alpha} for z < 0.
double projected_density(const StableSpec& spec, const Vec& u, double z, const QuadConfig& quad = {});

/// The exponent as a function of direction.
class ExponentField {
 public:
  virtual ~ExponentField() = default;
  virtual int dim() const = 0;
  virtual double operator()(const Vec& n) const = 0;
};

class ConstantExponent final : public ExponentField {
 public:
  ConstantExponent(int dim, double value) : dim_(dim), value_(value) {}
  int dim() const override { return dim_; }
  double operator()(const Vec&) const override { return value_; }

 private:
  int dim_;
  double value_;
};

/// β(n) of a spec precomputed on a table and interpolated: periodic cubic B-spline in the
/// angle for d = 2, piecewise linear on a geodesic grid for d = 3. Built from spec.dual()
/// it gives the decay exponent field n -> β(-n).
class BetaField final : public ExponentField {
 public:
  BetaField(const StableSpec& spec, const QuadConfig& quad = {}, int resolution = 0);
  ~BetaField() override;
  int dim() const override { return dim_; }
  double operator()(const Vec& n) const override;

 private:
  struct Impl;
  int dim_;
  std::shared_ptr<const Impl> impl_;
};

}  // namespace sdecay
