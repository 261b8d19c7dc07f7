#pragma once

#include "sdecay/geometry.hpp"
#include "sdecay/rng.hpp"
#include "sdecay/spectral.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace sdecay {

enum class Compensation { None, Gaussian };

std::string to_string(Compensation c);

/// Discretization of the process for path simulation.
///
/// Jumps of size >= eps are simulated one by one (compound Poisson over the ray
/// discretization); smaller jumps are either replaced by their mean drift (None) or by
/// a Brownian term with matching covariance (Gaussian). The cutoff adapts to the current
/// distance to the boundary, eps = min(eps_jump, eps_ratio * delta), and the skeleton step
/// is dt_step = min(dt, dt_ratio * delta^alpha). Both rules are scale invariant, so the
/// discretization error does not grow near the boundary.
struct PathConfig {
  int n_rays = 256;
  double eps_jump = 0.05;
  double dt = 1e-3;
  std::optional<Compensation> compensation;  // default: Gaussian for alpha >= 1, None otherwise
  double eps_ratio = 0.05;
  double dt_ratio = 0.01;
  double eps_floor = 1e-12;
  long max_steps = 10'000'000;
  std::uint64_t seed = 1;

  Compensation resolved_compensation(double alpha) const;
  void validate() const;
  nlohmann::json to_json() const;
  static PathConfig from_json(const nlohmann::json& j);
};

/// Chambers-Mallows-Stuck parameters of the one-dimensional strictly stable law whose Levy
/// density is c_plus z^{-1-alpha} on z > 0 and c_minus |z|^{-1-alpha} on z < 0.
///
/// For alpha != 1 the characteristic exponent is -sigma^alpha |xi|^alpha (1 - i skew sgn(xi) tan(pi alpha/2))
/// with sigma^alpha = -Gamma(-alpha) cos(pi alpha/2) (c_plus + c_minus) and
/// skew = (c_plus - c_minus)/(c_plus + c_minus). For alpha = 1 (c_plus = c_minus = C) the law
/// is Cauchy with scale pi C.
struct StableParams {
  double sigma = 1.0;  // scale at t = 1
  double skew = 0.0;
};

StableParams stable_params(double alpha, double c_plus, double c_minus);

/// P(Y_1 > 0) implied by CMS parameters (drift_b only for alpha = 1).
double positive_probability(double alpha, const StableParams& p, double drift_b = 0.0);

/// One draw of Y_t for the law above (plus drift b t when alpha = 1).
double sample_stable_1d(double alpha, double c_plus, double c_minus, double drift_b, double t, Rng& rng);

/// Standard CMS draw S_alpha(1, skew, 0); alpha != 1.
double sample_cms_standard(double alpha, double skew, Rng& rng);

/// Ray discretization of the spectral measure.
struct RayDiscretization {
  std::vector<Vec> dirs;
  std::vector<double> weights;  // θ_i = ∫_{cell_i} ϑ
  double total = 0.0;           // Σ θ_i
  Vec mean;                     // Σ θ_i w_i
  Mat second_moment;            // Σ θ_i w_i w_i^T
  Mat second_moment_chol;       // lower Cholesky factor
};

RayDiscretization discretize_rays(const SphericalDensity& theta, int n_rays);

struct ExitSample {
  double exit_time = 0.0;
  Vec exit_point;
  enum class By { Jump, SkeletonStep } exited_by = By::Jump;
  long path_steps = 0;
};

std::string to_string(ExitSample::By by);

/// Holds the discretized process; cheap to copy per thread.
class PathSimulator {
 public:
  PathSimulator(const StableSpec& spec, const PathConfig& cfg);

  const StableSpec& spec() const noexcept { return spec_; }
  const PathConfig& config() const noexcept { return cfg_; }
  const RayDiscretization& rays() const noexcept { return rays_; }

  /// Exact increment over time t of the ray-discretized process: Σ_i w_i Y_i with Y_i
  /// one-sided stable along ray i (antipodal pairs combine into Cauchy laws when alpha = 1).
  Vec increment(double t, Rng& rng) const;

  /// First exit from dom starting at x0. Throws BudgetExceeded after cfg.max_steps events.
  ExitSample sample_exit(const Domain& dom, const Vec& x0, Rng& rng);

 private:
  StableSpec spec_;
  PathConfig cfg_;
  Compensation comp_;
  RayDiscretization rays_;
  std::discrete_distribution<int> pick_;
  std::vector<StableParams> ray_params_;
  Vec gamma_;
};

Vec sample_increment_d(const StableSpec& spec, const PathConfig& cfg, double dt, Rng& rng);
ExitSample sample_exit(const StableSpec& spec, const PathConfig& cfg, const Domain& dom, const Vec& x0, Rng& rng);

using Payoff = std::function<double(const Vec&)>;

struct HarmonicEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long n = 0;
  long n_effective = 0;       // paths with a nonzero payoff
  double skeleton_fraction = 0.0;
  double mean_steps = 0.0;
};

/// Monte Carlo estimate of E^{x0}[payoff(X_τ)]. Path i uses Rng(cfg.seed, stream_offset + i),
/// so ensembles at different starting points share random numbers path by path. Results are
/// merged in path order and do not depend on the thread count.
HarmonicEstimate harmonic_estimate(const PathSimulator& sim, const Domain& dom, const Vec& x0, const Payoff& payoff,
                                   long n_samples, std::uint64_t stream_offset = 0, int threads = 1);

HarmonicEstimate harmonic_estimate(const StableSpec& spec, const PathConfig& cfg, const Domain& dom, const Vec& x0,
                                   const Payoff& payoff, long n_samples, int threads = 1);

/// Runs fn(i) for i in [0, n) over up to `threads` worker threads (contiguous blocks).
void parallel_for(long n, int threads, const std::function<void(long)>& fn);

int default_threads();

}  // namespace sdecay
