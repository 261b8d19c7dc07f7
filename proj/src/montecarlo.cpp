#include "sdecay/montecarlo.hpp"

#include "sdecay/quadrature.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace sdecay {

using nlohmann::json;

std::string to_string(Compensation c) { return c == Compensation::None ? "none" : "gaussian"; }

std::string to_string(ExitSample::By by) { return by == ExitSample::By::Jump ? "jump" : "skeleton-step"; }

Compensation PathConfig::resolved_compensation(double alpha) const {
  if (compensation) return *compensation;
  return alpha >= 1.0 ? Compensation::Gaussian : Compensation::None;
}

void PathConfig::validate() const {
  if (n_rays < 64) throw InvalidArgument("path config: n_rays must be at least 64");
  if (n_rays % 2 != 0) throw InvalidArgument("path config: n_rays must be even");
  if (!(eps_jump > 0.0 && eps_jump < 1.0)) throw InvalidArgument("path config: eps_jump must lie in (0, 1)");
  if (!(dt > 0.0)) throw InvalidArgument("path config: dt must be positive");
  if (!(eps_ratio > 0.0) || !(dt_ratio > 0.0)) throw InvalidArgument("path config: ratios must be positive");
  if (!(eps_floor > 0.0)) throw InvalidArgument("path config: eps_floor must be positive");
  if (max_steps < 1) throw InvalidArgument("path config: max_steps must be positive");
}

json PathConfig::to_json() const {
  json j{{"n_rays", n_rays},       {"eps_jump", eps_jump},   {"dt", dt},           {"eps_ratio", eps_ratio},
         {"dt_ratio", dt_ratio},   {"eps_floor", eps_floor}, {"max_steps", max_steps}, {"seed", seed}};
  j["compensation"] = compensation ? json(to_string(*compensation)) : json(nullptr);
  return j;
}

PathConfig PathConfig::from_json(const json& j) {
  PathConfig c;
  c.n_rays = j.value("n_rays", c.n_rays);
  c.eps_jump = j.value("eps_jump", c.eps_jump);
  c.dt = j.value("dt", c.dt);
  c.eps_ratio = j.value("eps_ratio", c.eps_ratio);
  c.dt_ratio = j.value("dt_ratio", c.dt_ratio);
  c.eps_floor = j.value("eps_floor", c.eps_floor);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.seed = j.value("seed", c.seed);
  if (j.contains("compensation") && !j["compensation"].is_null()) {
    const auto s = j["compensation"].get<std::string>();
    if (s == "none") c.compensation = Compensation::None;
    else if (s == "gaussian") c.compensation = Compensation::Gaussian;
    else throw InvalidArgument("unknown compensation mode '" + s + "'");
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// One-dimensional laws

StableParams stable_params(double alpha, double cp, double cm) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw InvalidArgument("alpha must lie in (0, 2)");
  if (!(cp >= 0.0 && cm >= 0.0 && cp + cm > 0.0)) {
    throw InvalidArgument("projected constants must be nonnegative with positive sum");
  }
  StableParams p;
  if (alpha == 1.0) {
    if (std::abs(cp - cm) > 1e-12 * (cp + cm)) throw InvalidArgument("alpha = 1 requires c_plus = c_minus");
    p.sigma = kPi * 0.5 * (cp + cm);
    p.skew = 0.0;
    return p;
  }
  if (std::abs(alpha - 1.0) < 1e-8) throw InvalidArgument("alpha within 1e-8 of 1: use alpha = 1 exactly");
  const double s_alpha = -boost::math::tgamma(-alpha) * std::cos(0.5 * kPi * alpha) * (cp + cm);
  p.sigma = std::pow(s_alpha, 1.0 / alpha);
  p.skew = (cp - cm) / (cp + cm);
  return p;
}

double positive_probability(double alpha, const StableParams& p, double drift_b) {
  if (alpha == 1.0) return 0.5 + std::atan(drift_b / p.sigma) / kPi;
  const double b = std::atan(p.skew * std::tan(0.5 * kPi * alpha)) / alpha;
  return 0.5 + b / kPi;
}

double sample_cms_standard(double alpha, double skew, Rng& rng) {
  const double v = kPi * (rng.uniform() - 0.5);
  const double w = rng.exponential();
  const double t = skew * std::tan(0.5 * kPi * alpha);
  const double b = std::atan(t) / alpha;
  const double s = std::pow(1.0 + t * t, 0.5 / alpha);
  const double avb = alpha * (v + b);
  return s * std::sin(avb) / std::pow(std::cos(v), 1.0 / alpha) *
         std::pow(std::cos(v - avb) / w, (1.0 - alpha) / alpha);
}

double sample_stable_1d(double alpha, double cp, double cm, double drift_b, double t, Rng& rng) {
  if (!(t > 0.0)) throw InvalidArgument("time must be positive");
  if (alpha != 1.0 && drift_b != 0.0) throw InvalidArgument("drift is admitted only for alpha = 1");
  const StableParams p = stable_params(alpha, cp, cm);
  if (alpha == 1.0) {
    const double v = kPi * (rng.uniform() - 0.5);
    return p.sigma * t * std::tan(v) + drift_b * t;
  }
  return p.sigma * std::pow(t, 1.0 / alpha) * sample_cms_standard(alpha, p.skew, rng);
}

// ---------------------------------------------------------------------------
// Rays

RayDiscretization discretize_rays(const SphericalDensity& theta, int n_rays) {
  const int d = theta.dim();
  RayDiscretization r;
  r.dirs = antipodal_direction_grid(d, n_rays);
  r.weights.resize(r.dirs.size());
  if (d == 2) {
    // Ray i sits at the centre of the arc [(i) h, (i+1) h] in its own angular ordering.
    const double h = 2.0 * kPi / n_rays;
    for (std::size_t i = 0; i < r.dirs.size(); ++i) {
      const double mid = std::atan2(r.dirs[i][1], r.dirs[i][0]);
      auto f = [&](double a) {
        Vec w(2);
        w << std::cos(a), std::sin(a);
        return theta.eval_unchecked(w);
      };
      std::vector<double> breaks{mid - 0.5 * h, mid - 0.25 * h, mid, mid + 0.25 * h, mid + 0.5 * h};
      r.weights[i] = quad::composite_gauss_legendre(f, breaks);
    }
  } else {
    const double cell = sphere_area(d) / n_rays;
    for (std::size_t i = 0; i < r.dirs.size(); ++i) r.weights[i] = cell * theta.eval_unchecked(r.dirs[i]);
  }
  r.mean = Vec::Zero(d);
  r.second_moment = Mat::Zero(d, d);
  for (std::size_t i = 0; i < r.dirs.size(); ++i) {
    r.total += r.weights[i];
    r.mean += r.weights[i] * r.dirs[i];
    r.second_moment += r.weights[i] * r.dirs[i] * r.dirs[i].transpose();
  }
  r.second_moment_chol = r.second_moment.llt().matrixL();
  return r;
}

// ---------------------------------------------------------------------------
// Path simulation

PathSimulator::PathSimulator(const StableSpec& spec, const PathConfig& cfg)
    : spec_(spec), cfg_(cfg), comp_(cfg.resolved_compensation(spec.alpha)) {
  cfg_.validate();
  if (!(spec.alpha > 0.0 && spec.alpha < 2.0)) throw InvalidArgument("alpha must lie in (0, 2)");
  if (spec.alpha != 1.0 && std::abs(spec.alpha - 1.0) < 1e-8) {
    throw InvalidArgument("alpha within 1e-8 of 1: use alpha = 1 exactly");
  }
  if (spec.gamma && spec.alpha != 1.0) throw InvalidArgument("drift is admitted only for alpha = 1");
  rays_ = discretize_rays(spec.theta, cfg.n_rays);
  pick_ = std::discrete_distribution<int>(rays_.weights.begin(), rays_.weights.end());
  gamma_ = spec.drift();
  const int n = static_cast<int>(rays_.dirs.size());
  if (spec.alpha == 1.0) {
    for (int i = 0; i < n / 2; ++i) {
      const double c = 0.5 * (rays_.weights[i] + rays_.weights[i + n / 2]);
      ray_params_.push_back(stable_params(1.0, c, c));
    }
  } else {
    for (int i = 0; i < n; ++i) ray_params_.push_back(stable_params(spec.alpha, rays_.weights[i], 0.0));
  }
}

Vec PathSimulator::increment(double t, Rng& rng) const {
  if (!(t > 0.0)) throw InvalidArgument("time must be positive");
  const int d = spec_.dim();
  Vec x = Vec::Zero(d);
  const double a = spec_.alpha;
  if (a == 1.0) {
    for (std::size_t i = 0; i < ray_params_.size(); ++i) {
      const double v = kPi * (rng.uniform() - 0.5);
      x += ray_params_[i].sigma * t * std::tan(v) * rays_.dirs[i];
    }
    x += gamma_ * t;
    return x;
  }
  const double tscale = std::pow(t, 1.0 / a);
  for (std::size_t i = 0; i < ray_params_.size(); ++i) {
    x += ray_params_[i].sigma * tscale * sample_cms_standard(a, 1.0, rng) * rays_.dirs[i];
  }
  return x;
}

ExitSample PathSimulator::sample_exit(const Domain& dom, const Vec& x0, Rng& rng) {
  if (x0.size() != spec_.dim() || dom.dim() != spec_.dim()) throw InvalidArgument("dimension mismatch");
  if (!dom.contains(x0)) throw InvalidArgument("sample_exit: starting point is not in the domain");
  const double a = spec_.alpha;
  const double theta_total = rays_.total;
  const bool gaussian = comp_ == Compensation::Gaussian;
  // Small-jump drift per unit of eps^{1-alpha}.
  double mean_coeff = 0.0;
  if (a > 1.0) mean_coeff = -1.0 / (a - 1.0);
  else if (a < 1.0) mean_coeff = 1.0 / (1.0 - a);
  const int d = spec_.dim();

  Vec x = x0;
  double t = 0.0;
  long steps = 0;
  Vec z(d);
  for (;;) {
    const double delta = dom.delta(x);
    const double eps = std::max(cfg_.eps_floor, std::min(cfg_.eps_jump, cfg_.eps_ratio * delta));
    const double eps_pow = std::pow(eps, -a);  // eps^{-alpha}
    const double rate = theta_total * eps_pow / a;
    const double dt_step = std::max(1e-300, std::min(cfg_.dt, cfg_.dt_ratio * std::pow(delta, a)));
    const double tau_jump = rng.exponential() / rate;
    const bool jump_first = tau_jump < dt_step;
    const double tau = jump_first ? tau_jump : dt_step;

    // Continuous part over tau.
    Vec drift = gamma_;
    if (a != 1.0) drift += (mean_coeff * eps * eps_pow) * rays_.mean;
    x += drift * tau;
    if (gaussian) {
      const double var = eps * eps * eps_pow / (2.0 - a) * tau;
      for (int k = 0; k < d; ++k) z[k] = rng.normal();
      x += std::sqrt(var) * (rays_.second_moment_chol * z);
    }
    t += tau;
    ++steps;
    if (!dom.contains(x)) return ExitSample{t, x, ExitSample::By::SkeletonStep, steps};

    if (jump_first) {
      const double r = eps * std::pow(rng.uniform(), -1.0 / a);
      const int i = pick_(rng.engine());
      x += r * rays_.dirs[i];
      if (!dom.contains(x)) return ExitSample{t, x, ExitSample::By::Jump, steps};
    }
    if (steps >= cfg_.max_steps) {
      std::ostringstream msg;
      msg << "path exceeded the step budget of " << cfg_.max_steps;
      throw BudgetExceeded(msg.str(), x, t, steps);
    }
  }
}

Vec sample_increment_d(const StableSpec& spec, const PathConfig& cfg, double dt, Rng& rng) {
  return PathSimulator(spec, cfg).increment(dt, rng);
}

ExitSample sample_exit(const StableSpec& spec, const PathConfig& cfg, const Domain& dom, const Vec& x0, Rng& rng) {
  PathSimulator sim(spec, cfg);
  return sim.sample_exit(dom, x0, rng);
}

// ---------------------------------------------------------------------------
// Ensembles

int default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

void parallel_for(long n, int threads, const std::function<void(long)>& fn) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>(std::max<long>(1, n))));
  if (threads == 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  const long block = (n + threads - 1) / threads;
  for (int k = 0; k < threads; ++k) {
    const long lo = k * block, hi = std::min(n, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (long i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

HarmonicEstimate harmonic_estimate(const PathSimulator& sim, const Domain& dom, const Vec& x0, const Payoff& payoff,
                                   long n_samples, std::uint64_t stream_offset, int threads) {
  if (n_samples < 2) throw InvalidArgument("harmonic_estimate needs at least two samples");
  std::vector<double> values(static_cast<std::size_t>(n_samples));
  std::vector<long> steps(static_cast<std::size_t>(n_samples));
  std::vector<unsigned char> skeleton(static_cast<std::size_t>(n_samples));
  threads = std::max(1, threads);
  const long block = (n_samples + threads - 1) / threads;
  parallel_for(threads, threads, [&](long k) {
    PathSimulator local = sim;
    const long lo = k * block, hi = std::min(n_samples, lo + block);
    for (long i = lo; i < hi; ++i) {
      Rng rng(local.config().seed, stream_offset + static_cast<std::uint64_t>(i));
      const ExitSample s = local.sample_exit(dom, x0, rng);
      values[i] = payoff(s.exit_point);
      steps[i] = s.path_steps;
      skeleton[i] = s.exited_by == ExitSample::By::SkeletonStep;
    }
  });
  HarmonicEstimate est;
  est.n = n_samples;
  double sum = 0.0, sum_steps = 0.0;
  long n_skel = 0;
  for (long i = 0; i < n_samples; ++i) {
    sum += values[i];
    sum_steps += static_cast<double>(steps[i]);
    n_skel += skeleton[i];
    if (values[i] != 0.0) ++est.n_effective;
  }
  est.mean = sum / n_samples;
  double ss = 0.0;
  for (long i = 0; i < n_samples; ++i) ss += (values[i] - est.mean) * (values[i] - est.mean);
  est.std_error = std::sqrt(ss / (n_samples - 1) / n_samples);
  est.skeleton_fraction = static_cast<double>(n_skel) / n_samples;
  est.mean_steps = sum_steps / n_samples;
  return est;
}

HarmonicEstimate harmonic_estimate(const StableSpec& spec, const PathConfig& cfg, const Domain& dom, const Vec& x0,
                                   const Payoff& payoff, long n_samples, int threads) {
  PathSimulator sim(spec, cfg);
  return harmonic_estimate(sim, dom, x0, payoff, n_samples, 0, threads);
}

}  // namespace sdecay
