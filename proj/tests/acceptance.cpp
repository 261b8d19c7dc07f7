// Acceptance driver. `sdecay_acceptance N` runs criterion N and prints one PASS/FAIL line;
// `sdecay_acceptance all` runs every criterion in order. Exit status is nonzero on any FAIL.

#include "sdecay/cli.hpp"
#include "sdecay/experiments.hpp"
#include "sdecay/generator.hpp"
#include "sdecay/geometry.hpp"
#include "sdecay/montecarlo.hpp"
#include "sdecay/projection.hpp"
#include "sdecay/spectral.hpp"

#include "support/oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace sdecay;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec on_circle(double phi) { return v2(std::cos(phi), std::sin(phi)); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct NamedSpec {
  std::string name;
  StableSpec spec;
  // Independent evaluation of the spectral density for the oracles.
  std::function<double(double, double)> theta;
};

NamedSpec iso(double alpha) {
  StableSpec s;
  s.alpha = alpha;
  s.theta = SphericalDensity::constant(2, 1.0);
  return {fmt("iso a=%.1f", alpha), s, [](double, double) { return 1.0; }};
}

NamedSpec tilt(double alpha, const Vec& v) {
  StableSpec s;
  s.alpha = alpha;
  s.theta = SphericalDensity::cosine_tilt(2, 1.0, 0.5, v);
  const double vx = v[0], vy = v[1];
  return {fmt("tilt a=%.1f v=(%.1f,%.1f)", alpha, vx, vy), s,
          [vx, vy](double wx, double wy) { return 1.0 + 0.5 * (wx * vx + wy * vy); }};
}

// At alpha = 1 a tilted density is not admissible; the drifted constant density takes its slot.
NamedSpec cauchy_drift() {
  StableSpec s;
  s.alpha = 1.0;
  s.theta = SphericalDensity::constant(2, 1.0);
  s.gamma = v2(0.3, 0.0);
  return {"iso a=1 drift=(0.3,0)", s, [](double, double) { return 1.0; }};
}

std::vector<NamedSpec> six_specs() {
  return {iso(0.6), tilt(0.6, v2(1, 0)), iso(1.0), cauchy_drift(), iso(1.5), tilt(1.5, v2(1, 0))};
}

double drift_along(const StableSpec& s, const Vec& u) { return s.gamma ? s.gamma->dot(u) : 0.0; }

// ---------------------------------------------------------------------------

Outcome positivity_oracle() {
  const long n = 1000000;
  double worst = 0.0;
  std::string where;
  std::uint64_t stream = 0;
  for (const auto& ns : six_specs()) {
    for (int k = 0; k < 8; ++k) {
      const Vec u = on_circle(k * oracle::kPi / 4);
      const DirectionalLaw law = directional_law(ns.spec, u);
      Rng rng(1, stream++);
      long pos = 0;
      for (long i = 0; i < n; ++i)
        pos += sample_stable_1d(ns.spec.alpha, law.c_plus, law.c_minus, drift_along(ns.spec, u), 1.0, rng) > 0.0;
      const double p = static_cast<double>(pos) / n;
      const double se = ns.spec.alpha * std::sqrt(p * (1 - p) / n);
      const double z = std::abs(ns.spec.alpha * p - law.beta) / se;
      if (z > worst) {
        worst = z;
        where = ns.name + fmt(" u#%d", k);
      }
    }
  }
  return {worst <= 4.0, fmt("48 cases, worst |a p - beta| = %.2f se at ", worst) + where};
}

Outcome antipodal_identity() {
  double worst = 0.0;
  for (const auto& ns : six_specs()) {
    for (int k = 0; k < 256; ++k) {
      const Vec u = on_circle(2 * oracle::kPi * k / 256);
      worst = std::max(worst, std::abs(beta(ns.spec, u) + beta(ns.spec, -u) - ns.spec.alpha));
    }
  }
  return {worst <= 1e-8, fmt("max |beta(u) + beta(-u) - alpha| = %.2e over 6 x 256 directions", worst)};
}

Outcome strict_bounds() {
  double margin = 1e300;
  for (const auto& ns : six_specs()) {
    const double a = ns.spec.alpha;
    for (int k = 0; k < 256; ++k) {
      const double b = beta(ns.spec, on_circle(2 * oracle::kPi * k / 256));
      margin = std::min({margin, b - std::max(0.0, a - 1.0), std::min(a, 1.0) - b});
    }
  }
  return {margin > 0.0, fmt("smallest distance to the bounds = %.4f", margin)};
}

Outcome closed_form() {
  double worst = 0.0;
  for (double a : {0.5, 1.0, 1.5}) {
    StableSpec s;
    s.alpha = a;
    s.theta = SphericalDensity::constant(2, 1.0);
    for (int k = 0; k < 8; ++k) worst = std::max(worst, std::abs(c_plus(s, on_circle(0.3 + k)) - oracle::wallis(a)));
  }
  return {worst <= 1e-8, fmt("max |C+ - Wallis| = %.2e", worst)};
}

Outcome halfspace_harmonicity() {
  struct Case {
    NamedSpec ns;
    Vec u;
  };
  std::vector<Case> cases = {{iso(1.5), v2(0, 1)},
                             {tilt(1.5, v2(1, 0)), v2(1, 0)},
                             {tilt(0.6, v2(0.6, 0.8)), v2(0, 1)},
                             {cauchy_drift(), v2(1, 0)}};
  GeneratorQuad quad;
  quad.tol = 1e-7;
  double worst = 0.0, weakest_control = 1e300;
  for (const auto& c : cases) {
    const Vec perp = v2(-c.u[1], c.u[0]);
    std::vector<Vec> pts;
    for (double t : {0.01, 0.1, 1.0, 10.0})
      for (double a : {0.0, 0.5}) pts.push_back(t * c.u + a * perp);
    const double p = decay_exponent(c.ns.spec, c.u);
    const auto scan = halfspace_harmonicity_scan(c.ns.spec, c.u, pts, quad);
    const auto control = halfspace_harmonicity_scan(c.ns.spec, c.u, pts, quad, p + 0.1);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double bound = 1e-5 * (1.0 + std::pow(pts[i].dot(c.u), p - c.ns.spec.alpha));
      worst = std::max(worst, std::abs(scan.values[i].value) / bound);
      weakest_control = std::min(weakest_control, std::abs(control.values[i].value) / bound);
    }
  }
  return {worst <= 1.0 && weakest_control >= 100.0,
          fmt("max |Ah|/bound = %.3g; control min |Ah|/bound = %.3g", worst, weakest_control)};
}

Outcome generator_boundedness() {
  const NamedSpec ns = tilt(1.5, v2(1, 0));
  const auto ball = make_ball(v2(0, 0), 1.0);
  const Vec z = v2(-1, 0);
  const std::vector<double> deltas = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  const auto scan = g_boundedness_scan(ns.spec, ball, z, deltas);
  // Control: the positivity exponent of the inward normal at z, held constant.
  const StableSpec local = ns.spec.rotated(scan.frame.rotation);
  const double wrong = beta(local, unit_vector(2, 1));
  const auto control = g_boundedness_scan(ns.spec, ball, z, deltas, {}, std::make_shared<ConstantExponent>(2, wrong));
  return {scan.slope >= -0.1 && control.slope <= -0.3,
          fmt("slope %.3f (need >= -0.1); control exponent %.4f slope %.3f (need <= -0.3)", scan.slope, wrong,
              control.slope)};
}

// Smooth functions for the brute-force comparison. Each has a closed-form value and gradient.
struct Smooth {
  std::string name;
  Vec x;
  oracle::Smooth2d fn;
  TestFunctionPtr lib;
};

TestFunctionPtr custom(const oracle::Smooth2d& fn, double bound, std::function<double(double)> envelope) {
  CustomFunction c;
  c.dim = 2;
  c.value = [fn](const Vec& y) { return fn.f(y[0], y[1]); };
  c.gradient = [fn](const Vec& y) {
    double gx = 0, gy = 0;
    fn.grad(y[0], y[1], gx, gy);
    return v2(gx, gy);
  };
  c.bound = bound;
  // envelope(s) bounds |f| outside the ball of radius s around the origin.
  c.tail = [envelope](const Vec& x, const Vec&, double R, double alpha) {
    return RayTail{0.0, envelope(std::max(0.0, R - x.norm())) * std::pow(R, -alpha) / alpha};
  };
  return make_custom_function(c);
}

std::vector<Smooth> smooth_suite() {
  std::vector<Smooth> out;
  auto gauss = [](double cx, double cy, double m11, double m12, double m22, double amp) {
    return oracle::Smooth2d{[=](double x, double y) {
                              const double a = x - cx, b = y - cy;
                              return amp * std::exp(-(m11 * a * a + 2 * m12 * a * b + m22 * b * b));
                            },
                            [=](double x, double y, double& gx, double& gy) {
                              const double a = x - cx, b = y - cy;
                              const double e = amp * std::exp(-(m11 * a * a + 2 * m12 * a * b + m22 * b * b));
                              gx = -2 * (m11 * a + m12 * b) * e;
                              gy = -2 * (m12 * a + m22 * b) * e;
                            }};
  };
  auto bump = [](double cx, double cy, double m11, double m12, double m22, double amp) {
    Mat m(2, 2);
    m << m11, m12, m12, m22;
    return make_gaussian_bump(v2(cx, cy), m, amp);
  };
  out.push_back({"gaussian at its centre", v2(0, 0), gauss(0, 0, 1, 0, 1, 1), bump(0, 0, 1, 0, 1, 1)});
  out.push_back({"gaussian off centre", v2(0.3, -0.2), gauss(0, 0, 1, 0, 1, 1), bump(0, 0, 1, 0, 1, 1)});
  out.push_back({"anisotropic gaussian", v2(0.5, 0), gauss(0.1, 0.2, 2, 0.5, 1, 1), bump(0.1, 0.2, 2, 0.5, 1, 1)});
  out.push_back({"narrow gaussian", v2(0.2, 0.1), gauss(0, 0, 4, 0, 4, 3), bump(0, 0, 4, 0, 4, 3)});
  {
    const auto g1 = gauss(0, 0, 1, 0, 1, 1), g2 = gauss(1, 0.5, 2, 0, 2, -0.7);
    oracle::Smooth2d sum{[=](double x, double y) { return g1.f(x, y) + g2.f(x, y); },
                         [=](double x, double y, double& gx, double& gy) {
                           double ax, ay, bx, by;
                           g1.grad(x, y, ax, ay);
                           g2.grad(x, y, bx, by);
                           gx = ax + bx;
                           gy = ay + by;
                         }};
    out.push_back({"two gaussians", v2(0.4, 0.2), sum,
                   make_linear_combination({{1.0, bump(0, 0, 1, 0, 1, 1)}, {-0.7, bump(1, 0.5, 2, 0, 2, 1)}})});
  }
  {
    oracle::Smooth2d f{[](double x, double y) { return 1.0 / std::pow(1 + x * x + y * y, 2); },
                       [](double x, double y, double& gx, double& gy) {
                         const double q = 1 + x * x + y * y;
                         gx = -4 * x / (q * q * q);
                         gy = -4 * y / (q * q * q);
                       }};
    out.push_back({"inverse quartic", v2(0.4, 0.3), f, custom(f, 1.0, [](double s) { return std::pow(1 + s * s, -2); })});
  }
  {
    oracle::Smooth2d f{[](double x, double y) { return std::cos(2 * x) * std::exp(-(x * x + y * y) / 2); },
                       [](double x, double y, double& gx, double& gy) {
                         const double e = std::exp(-(x * x + y * y) / 2);
                         gx = (-2 * std::sin(2 * x) - x * std::cos(2 * x)) * e;
                         gy = -y * std::cos(2 * x) * e;
                       }};
    out.push_back({"modulated gaussian", v2(0.1, 0.6), f, custom(f, 1.0, [](double s) { return std::exp(-s * s / 2); })});
  }
  {
    oracle::Smooth2d f{[](double x, double y) { return x * std::exp(-(x * x + y * y)); },
                       [](double x, double y, double& gx, double& gy) {
                         const double e = std::exp(-(x * x + y * y));
                         gx = (1 - 2 * x * x) * e;
                         gy = -2 * x * y * e;
                       }};
    out.push_back({"odd gaussian", v2(-0.3, 0.2), f, custom(f, 0.5, [](double s) { return s < std::sqrt(0.5) ? 0.43 : s * std::exp(-s * s); })});
  }
  {
    oracle::Smooth2d f{[](double x, double y) { return (1 + y * y) * std::exp(-(x * x + y * y)); },
                       [](double x, double y, double& gx, double& gy) {
                         const double e = std::exp(-(x * x + y * y));
                         gx = -2 * x * (1 + y * y) * e;
                         gy = (2 * y - 2 * y * (1 + y * y)) * e;
                       }};
    out.push_back({"gaussian times quadratic", v2(0.2, -0.5), f,
                   custom(f, 1.0, [](double s) { return (1 + s * s) * std::exp(-s * s); })});
  }
  {
    oracle::Smooth2d f{[](double x, double y) { return 1.0 / (std::cosh(x) * std::cosh(y)); },
                       [](double x, double y, double& gx, double& gy) {
                         const double v = 1.0 / (std::cosh(x) * std::cosh(y));
                         gx = -std::tanh(x) * v;
                         gy = -std::tanh(y) * v;
                       }};
    out.push_back({"product sech", v2(0.7, 0.1), f, custom(f, 1.0, [](double s) { return 4.0 * std::exp(-s); })});
  }
  return out;
}

Outcome generator_oracle() {
  const std::vector<NamedSpec> specs = {iso(1.5), tilt(0.6, v2(0.6, 0.8)), cauchy_drift()};
  int fails = 0;
  double worst = 0.0;
  std::string where;
  for (const auto& ns : specs) {
    const double gx = ns.spec.gamma ? (*ns.spec.gamma)[0] : 0.0, gy = ns.spec.gamma ? (*ns.spec.gamma)[1] : 0.0;
    for (const auto& s : smooth_suite()) {
      const GeneratorValue g = apply_generator(ns.spec, *s.lib, s.x);
      auto ref = [&](long n_ang, long n_rad, double r_min) {
        return oracle::generator_2d(ns.spec.alpha, ns.theta, gx, gy, s.fn, s.x[0], s.x[1], n_ang, n_rad, r_min);
      };
      const double o = ref(1000, 10000, 1e-4);
      // Oracle error: grid halving plus the effect of doubling the Taylor core radius.
      const double o_err = std::abs(o - ref(500, 5000, 1e-4)) + std::abs(o - ref(1000, 10000, 2e-4));
      const double ratio = std::abs(g.value - o) / (g.err_estimate + o_err);
      if (!(ratio <= 1.0)) ++fails;
      if (ratio > worst) {
        worst = ratio;
        where = ns.name + ", " + s.name + fmt(" (diff %.2e, bounds %.2e + %.2e)", std::abs(g.value - o), g.err_estimate, o_err);
      }
    }
  }
  return {fails == 0, fmt("30 comparisons, %d outside the combined bound; worst |diff|/bound = %.3f: ", fails, worst) + where};
}

Outcome sampler_consistency() {
  const long n = 100000;
  const double dt = 1e-3;
  const std::vector<NamedSpec> specs = {iso(1.5), tilt(0.6, v2(0.6, 0.8)), cauchy_drift()};
  const PathConfig cfg;
  double p_min = 1.0;
  std::string where;
  std::uint64_t stream = 0;
  for (const auto& ns : specs) {
    const PathSimulator sim(ns.spec, cfg);
    for (int k = 0; k < 4; ++k) {
      const Vec u = on_circle(0.2 + k * oracle::kPi / 4);
      const DirectionalLaw law = directional_law(ns.spec, u);
      std::vector<double> a(n), b(n);
      Rng ra(1, stream++), rb(1, stream++);
      for (long i = 0; i < n; ++i) {
        a[i] = u.dot(sim.increment(dt, ra));
        b[i] = sample_stable_1d(ns.spec.alpha, law.c_plus, law.c_minus, drift_along(ns.spec, u), dt, rb);
      }
      const KsResult ks = ks_two_sample(a, b);
      if (ks.p_value < p_min) {
        p_min = ks.p_value;
        where = ns.name + fmt(" u#%d", k);
      }
    }
  }
  // Strict stability: X over lambda^alpha dt has the law of lambda X over dt.
  const NamedSpec ns = iso(1.5);
  const PathSimulator sim(ns.spec, cfg);
  const double lambda = 2.0;
  double p_scale = 1.0;
  for (int axis = 0; axis < 2; ++axis) {
    std::vector<double> a(n), b(n);
    Rng ra(1, stream++), rb(1, stream++);
    for (long i = 0; i < n; ++i) {
      a[i] = sim.increment(std::pow(lambda, ns.spec.alpha) * dt, ra)[axis];
      b[i] = lambda * sim.increment(dt, rb)[axis];
    }
    p_scale = std::min(p_scale, ks_two_sample(a, b).p_value);
  }
  return {p_min > 0.01 && p_scale > 0.01,
          fmt("projections: min KS p = %.3f (%s); scaling: min KS p = %.3f", p_min, where.c_str(), p_scale)};
}

Outcome exact_halfspace_decay() {
  const NamedSpec ns = tilt(1.5, v2(0, -1));
  const double p = decay_exponent(ns.spec, v2(0, 1));
  const auto t = default_ray_distances(std::numeric_limits<double>::infinity(), 1e-3, 1.5);
  const DecayReport r = exact_decay_report(t, [p](double s) { return std::pow(s, p); }, p);
  const double err = std::abs(r.fit.slope - p);
  return {err <= 1e-10, fmt("slope %.12f, predicted %.12f, error %.1e", r.fit.slope, p, err)};
}

Outcome halfspace_decay_mc() {
  const NamedSpec ns = tilt(1.5, v2(0, -1));
  DecayConfig cfg;
  cfg.n_samples = 100000;
  cfg.payoff.kind = PayoffSpec::Kind::HalfspacePower;
  cfg.cap = {Cap::Kind::Slab, 1.0};
  const DecayReport r = run_decay_experiment(ns.spec, make_halfspace(v2(0, 0), v2(0, 1)), v2(0, 0), cfg);
  const bool covers = r.fit.ci_lo <= r.beta_predicted && r.beta_predicted <= r.fit.ci_hi;
  const bool close = std::abs(r.fit.slope - r.beta_predicted) <= 0.02;
  return {r.conclusive() && r.rays.size() == 6 && covers && close,
          fmt("fitted %.4f, predicted %.4f, CI [%.4f, %.4f], %zu rays, status %s", r.fit.slope, r.beta_predicted,
              r.fit.ci_lo, r.fit.ci_hi, r.rays.size(), r.status.c_str())};
}

Outcome ball_decay() {
  const NamedSpec ns = tilt(1.5, v2(1, 0));
  const auto ball = make_ball(v2(0, 0), 1.0);
  DecayConfig cfg;
  cfg.n_samples = 100000;
  cfg.payoff = {PayoffSpec::Kind::FarIndicator, 2.0};
  std::vector<DecayReport> reps;
  for (const Vec& z : {v2(-1, 0), v2(1, 0)}) reps.push_back(run_decay_experiment(ns.spec, ball, z, cfg));
  bool ok = true;
  std::string detail;
  for (const auto& r : reps) {
    ok = ok && r.conclusive() && std::abs(r.fit.slope - r.beta_predicted) <= 0.05;
    detail += fmt("z=(%g,%g): fitted %.4f predicted %.4f CI [%.4f, %.4f]; ", r.z[0], r.z[1], r.fit.slope,
                  r.beta_predicted, r.fit.ci_lo, r.fit.ci_hi);
  }
  const bool ordered = (reps[0].beta_predicted - reps[1].beta_predicted) * (reps[0].fit.slope - reps[1].fit.slope) > 0;
  return {ok && ordered, detail + (ordered ? "order consistent" : "order inconsistent")};
}

Outcome harmonic_reduction() {
  const NamedSpec ns = iso(1.5);
  const std::vector<Vec> fractions = {v2(0, 0.25), v2(0, 0.5), v2(0, 0.75), v2(0.5, 0.5), v2(-0.5, 0.25)};
  const auto series = run_reduction_series(ns.spec, make_ball(v2(0, 0), 1.0), v2(0, -1), PathConfig{},
                                           {0.25, 0.125, 0.0625}, fractions, 100000);
  std::string detail = "max|ratio-1| by radius:";
  for (const auto& r : series.reports) detail += fmt(" %.4f (se %.4f)", r.max_deviation, r.max_deviation_se);
  detail += "; factors";
  for (std::size_t i = 0; i < series.factors.size(); ++i)
    detail += fmt(" %.3f%s", series.factors[i], series.separated[i] ? "" : " (not separated)");
  return {series.passed(0.8), detail};
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

int dispatch(std::vector<std::string> args) {
  args.insert(args.begin(), "sdecay");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "sdecay_acceptance_replay";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "tilt.json")
      << R"({"alpha": 1.5, "dim": 2, "theta": {"kind": "cosine-tilt", "c0": 1.0, "c1": 0.5, "v": [1.0, 0.0]}})";
  std::ofstream(root / "ball.json") << R"({"kind": "ball", "center": [0.0, 0.0], "radius": 1.0})";
  const std::string spec = (root / "tilt.json").string(), ball = (root / "ball.json").string();

  const std::vector<std::pair<std::string, std::vector<std::string>>> runs = {
      {"beta-map", {"--spec", spec, "--dirs", "64"}},
      {"generator-check", {"--spec", spec, "--domain", ball, "--z", "-1,0"}},
      {"simulate-exit", {"--spec", spec, "--domain", ball, "--x0", "0.2,0.1", "--n", "500", "--seed", "11"}},
      {"decay-experiment", {"--spec", spec, "--domain", ball, "--z", "-1,0", "--n", "400", "--seed", "5", "--csv"}},
      {"reduction-check",
       {"--spec", spec, "--domain", ball, "--z", "0,-1", "--radii", "0.25,0.125", "--n", "300", "--seed", "3"}},
  };
  int mismatches = 0, files = 0;
  std::string detail;
  for (const auto& [sub, flags] : runs) {
    const fs::path first = root / (sub + "_1"), second = root / (sub + "_2");
    std::vector<std::string> a = {sub};
    a.insert(a.end(), flags.begin(), flags.end());
    a.insert(a.end(), {"--out", first.string(), "--threads", "1", "--quiet"});
    const int c1 = dispatch(a);
    const int c2 = dispatch({sub, "--config", (first / "manifest.json").string(), "--out", second.string(), "--threads",
                             "2", "--quiet"});
    bool same = c1 == c2 && c1 != cli::kUsage;
    for (const auto& entry : fs::directory_iterator(first)) {
      const auto name = entry.path().filename();
      if (name == "manifest.json") continue;
      ++files;
      same = same && fs::exists(second / name) && slurp(entry.path()) == slurp(second / name);
    }
    const auto m1 = nlohmann::json::parse(slurp(first / "manifest.json"));
    const auto m2 = nlohmann::json::parse(slurp(second / "manifest.json"));
    same = same && m1["config"] == m2["config"] && m1["outputs"] == m2["outputs"];
    if (!same) {
      ++mismatches;
      detail += " " + sub;
    }
  }
  return {mismatches == 0, fmt("5 subcommands replayed from their manifests with a different thread count, %d output "
                               "files compared, %d mismatched",
                               files, mismatches) +
                               detail};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "positivity exponent against sampling", 120, positivity_oracle},
    {2, "antipodal identity", 10, antipodal_identity},
    {3, "strict exponent bounds", 10, strict_bounds},
    {4, "closed-form tail constant", 10, closed_form},
    {5, "half-space harmonicity", 120, halfspace_harmonicity},
    {6, "generator boundedness near the boundary", 300, generator_boundedness},
    {7, "generator against the brute-force oracle", 300, generator_oracle},
    {8, "sampler consistency", 180, sampler_consistency},
    {9, "exact half-space decay", 1, exact_halfspace_decay},
    {10, "Monte Carlo half-space decay", 600, halfspace_decay_mc},
    {11, "decay exponents on the ball", 1800, ball_decay},
    {12, "harmonic reduction", 900, harmonic_reduction},
    {13, "reproducibility from manifests", 300, reproducibility},
};

bool run_one(const Criterion& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = c.run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs <= c.limit_s;
  const bool pass = o.pass && in_time;
  std::printf("%s criterion %d (%s): %s [%.1f s of %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
              o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", over budget");
  std::fflush(stdout);
  return pass;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string which = argc > 1 ? argv[1] : "all";
  bool ok = true;
  bool found = false;
  for (const auto& c : kCriteria) {
    if (which == "all" || which == std::to_string(c.id)) {
      found = true;
      ok = run_one(c) && ok;
    }
  }
  if (!found) {
    std::fprintf(stderr, "usage: %s [1-13|all]\n", argv[0]);
    return 64;
  }
  return ok ? 0 : 1;
}
