#pragma once

#include "sdecay/geometry.hpp"
#include "sdecay/montecarlo.hpp"
#include "sdecay/projection.hpp"
#include "sdecay/spectral.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sdecay {

struct RayPoint {
  double t = 0.0;
  double value = 0.0;
  double se = 0.0;
};

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double slope_se = 0.0;
  double r_squared = 1.0;
  std::vector<double> residuals;  // log value - fitted, per point
  bool weighted = false;

  nlohmann::json to_json() const;
};

/// Weighted least squares of log value on log t with weights (value/se)^2 (unit weights when
/// any se is zero) and a 95% Student t-interval for the slope. Needs at least 4 points.
PowerLawFit fit_power_law(const std::vector<RayPoint>& points);

/// sup / inf of positive values.
double relative_oscillation(const std::vector<double>& values);

/// Geometric distances with ratio 1/sqrt(2) from 0.3 min(collar, 1) down to max(0.02, 5 dt^{1/alpha}).
std::vector<double> default_ray_distances(double collar, double dt, double alpha);

/// Optional truncation of the simulation domain around the boundary point (normalized units).
struct Cap {
  enum class Kind { None, Ball, Slab } kind = Kind::None;
  double size = 0.0;  // ball radius, or slab height along the normal

  nlohmann::json to_json() const;
  static Cap from_json(const nlohmann::json& j);
};

/// What the exit position is scored with (normalized coordinates, boundary point at 0).
struct PayoffSpec {
  enum class Kind {
    FarIndicator,   // 1{|y| > radius}
    HalfspacePower  // <y, e_d>_+^p with p the decay exponent at z
  } kind = Kind::FarIndicator;
  double radius = 2.0;

  nlohmann::json to_json() const;
  static PayoffSpec from_json(const nlohmann::json& j);
};

struct DecayConfig {
  PathConfig path;
  std::vector<double> t;  // empty: default_ray_distances
  long n_samples = 100000;
  PayoffSpec payoff;
  Cap cap;
  int fit_skip_largest = 0;  // rays dropped from the far end of the fit window
  int threads = 1;

  nlohmann::json to_json() const;
  static DecayConfig from_json(const nlohmann::json& j);
};

struct DecayReport {
  Vec z;
  Vec n;
  double beta_predicted = 0.0;    // decay exponent at z
  double positivity_exponent = 0.0;  // β(n(z)), reported for comparison
  std::vector<RayPoint> rays;
  PowerLawFit fit;
  double fit_t_min = 0.0;
  double fit_t_max = 0.0;
  double shifted_slope = 0.0;  // fit with the window moved one geometric step inward
  bool window_sensitive = false;
  double skeleton_fraction = 0.0;
  double mean_steps = 0.0;
  std::string status = "ok";  // "ok" or "inconclusive"
  std::string note;

  bool conclusive() const { return status == "ok"; }
  nlohmann::json to_json() const;
};

/// Estimates u(t n) = E[payoff(X_τ)] along the inward normal at z and fits the boundary decay
/// exponent. Everything runs in the normalized frame at z; ray points share random numbers.
DecayReport run_decay_experiment(const StableSpec& spec, DomainPtr dom, const Vec& z, const DecayConfig& cfg);

/// Fit of exact values along a ray (no simulation).
DecayReport exact_decay_report(const std::vector<double>& t, const std::function<double(double)>& u, double predicted);

struct ReductionPoint {
  Vec x;
  double g = 0.0;
  double g_r = 0.0;
  double se = 0.0;
  double ratio() const { return g_r / g; }
  double ratio_se() const { return se / g; }
};

struct ReductionReport {
  double r = 0.0;
  std::vector<ReductionPoint> points;
  double ratio_min = 0.0;
  double ratio_max = 0.0;
  double max_deviation = 0.0;     // max |ratio - 1|
  double max_deviation_se = 0.0;  // standard error of the maximizing ratio
  std::string status = "ok";
  std::string note;

  nlohmann::json to_json() const;
};

/// g_r(x) = E^x g(X_τ) for the exit from D ∩ B(z, r) (normalized frame), compared with g(x),
/// g = δ^{p(n(·))} 1{δ < 1} with p the decay exponent field (no cut on a half-space, where g is
/// exactly harmonic). Points are in normalized coordinates.
ReductionReport run_reduction_check(const StableSpec& spec, DomainPtr dom, const Vec& z, const PathConfig& cfg,
                                    double r, const std::vector<Vec>& points, long n_samples, int threads = 1);

struct ReductionSeries {
  std::vector<ReductionReport> reports;  // radii in decreasing order
  std::vector<double> factors;           // max_deviation(r/2) / max_deviation(r)
  std::vector<bool> separated;           // gap exceeds 3 combined standard errors
  std::vector<bool> within_calibrated;   // ratios (± 3σ) inside 1 ± 2 max_deviation(2r)
  bool passed(double factor = 0.8) const;

  nlohmann::json to_json() const;
};

/// Reduction checks at the given radii with evaluation points r * fraction.
ReductionSeries run_reduction_series(const StableSpec& spec, DomainPtr dom, const Vec& z, const PathConfig& cfg,
                                     const std::vector<double>& radii, const std::vector<Vec>& fractions,
                                     long n_samples, int threads = 1);

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Limiting Kolmogorov distribution: P(sup |B| > lambda) for a Brownian bridge B.
double kolmogorov_survival(double lambda);

}  // namespace sdecay
