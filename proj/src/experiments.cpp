#include "sdecay/experiments.hpp"

#include "sdecay/generator.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sdecay {

using nlohmann::json;

namespace {

json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json rays_json(const std::vector<RayPoint>& rays) {
  json a = json::array();
  for (const auto& p : rays) a.push_back(json{{"t", p.t}, {"value", p.value}, {"se", p.se}});
  return a;
}

DomainPtr capped(DomainPtr local, const Cap& cap, int d) {
  switch (cap.kind) {
    case Cap::Kind::None:
      return local;
    case Cap::Kind::Ball:
      return make_intersection({local, make_ball(Vec::Zero(d), cap.size)});
    case Cap::Kind::Slab:
      return make_intersection({local, make_halfspace(cap.size * unit_vector(d, d - 1), -unit_vector(d, d - 1))});
  }
  return local;
}

}  // namespace

// ---------------------------------------------------------------------------
// Regression and small statistics

json PowerLawFit::to_json() const {
  return json{{"slope", slope},         {"intercept", intercept}, {"ci", {ci_lo, ci_hi}},
              {"slope_se", slope_se},   {"r_squared", r_squared}, {"residuals", residuals},
              {"weighted", weighted}};
}

PowerLawFit fit_power_law(const std::vector<RayPoint>& points) {
  if (points.size() < 4) throw InvalidArgument("a power-law fit needs at least 4 points");
  const std::size_t n = points.size();
  PowerLawFit fit;
  fit.weighted = std::all_of(points.begin(), points.end(), [](const RayPoint& p) { return p.se > 0.0; });
  std::vector<double> x(n), y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(points[i].t > 0.0) || !(points[i].value > 0.0)) throw InvalidArgument("power-law fit needs positive data");
    x[i] = std::log(points[i].t);
    y[i] = std::log(points[i].value);
    w[i] = fit.weighted ? std::pow(points[i].value / points[i].se, 2) : 1.0;
  }
  const double sw = std::accumulate(w.begin(), w.end(), 0.0);
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < n; ++i) xm += w[i] * x[i], ym += w[i] * y[i];
  xm /= sw;
  ym /= sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (x[i] - xm) * (x[i] - xm);
    sxy += w[i] * (x[i] - xm) * (y[i] - ym);
    syy += w[i] * (y[i] - ym) * (y[i] - ym);
  }
  if (!(sxx > 1e-300)) throw InvalidArgument("degenerate design: all distances are equal");
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    fit.residuals.push_back(r);
    rss += w[i] * r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  const double dof = static_cast<double>(n) - 2.0;
  fit.slope_se = std::sqrt(rss / dof / sxx);
  const boost::math::students_t dist(dof);
  const double q = boost::math::quantile(dist, 0.975);
  fit.ci_lo = fit.slope - q * fit.slope_se;
  fit.ci_hi = fit.slope + q * fit.slope_se;
  return fit;
}

double relative_oscillation(const std::vector<double>& values) {
  if (values.empty()) throw InvalidArgument("relative oscillation of an empty set");
  for (double v : values) {
    if (!(v > 0.0)) throw InvalidArgument("relative oscillation needs positive values");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi / *lo;
}

std::vector<double> default_ray_distances(double collar, double dt, double alpha) {
  const double t_max = 0.3 * std::min(collar, 1.0);
  const double t_min = std::max(0.02, 5.0 * std::pow(dt, 1.0 / alpha));
  std::vector<double> t;
  for (double s = t_max; s >= t_min * (1.0 - 1e-12) && std::isfinite(s); s /= std::sqrt(2.0)) t.push_back(s);
  if (t.size() < 4) throw InvalidArgument("the collar is too thin for a decay fit at this time step");
  return t;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("KS test needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  const double ne = na * nb / (na + nb);
  const double sq = std::sqrt(ne);
  // Stephens' small-sample correction to the asymptotic statistic.
  return {d, kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d)};
}

// ---------------------------------------------------------------------------
// Configuration

json Cap::to_json() const {
  const char* k = kind == Kind::Ball ? "ball" : kind == Kind::Slab ? "slab" : "none";
  return json{{"kind", k}, {"size", size}};
}

Cap Cap::from_json(const json& j) {
  Cap c;
  const std::string k = j.value("kind", std::string("none"));
  if (k == "ball") {
    c.kind = Kind::Ball;
  } else if (k == "slab") {
    c.kind = Kind::Slab;
  } else if (k != "none") {
    throw InvalidArgument("unknown cap kind: " + k);
  }
  c.size = j.value("size", 0.0);
  if (c.kind != Kind::None && !(c.size > 0.0)) throw InvalidArgument("cap size must be positive");
  return c;
}

json PayoffSpec::to_json() const {
  return json{{"kind", kind == Kind::FarIndicator ? "far-indicator" : "halfspace-power"}, {"radius", radius}};
}

PayoffSpec PayoffSpec::from_json(const json& j) {
  PayoffSpec p;
  const std::string k = j.value("kind", std::string("far-indicator"));
  if (k == "halfspace-power") {
    p.kind = Kind::HalfspacePower;
  } else if (k != "far-indicator") {
    throw InvalidArgument("unknown payoff kind: " + k);
  }
  p.radius = j.value("radius", p.radius);
  if (!(p.radius > 0.0)) throw InvalidArgument("payoff radius must be positive");
  return p;
}

json DecayConfig::to_json() const {
  return json{{"path", path.to_json()},       {"t", t},           {"n_samples", n_samples},
              {"payoff", payoff.to_json()},   {"cap", cap.to_json()}, {"fit_skip_largest", fit_skip_largest}};
}

DecayConfig DecayConfig::from_json(const json& j) {
  DecayConfig c;
  if (j.contains("path")) c.path = PathConfig::from_json(j["path"]);
  if (j.contains("t")) c.t = j["t"].get<std::vector<double>>();
  c.n_samples = j.value("n_samples", c.n_samples);
  if (j.contains("payoff")) c.payoff = PayoffSpec::from_json(j["payoff"]);
  if (j.contains("cap")) c.cap = Cap::from_json(j["cap"]);
  c.fit_skip_largest = j.value("fit_skip_largest", c.fit_skip_largest);
  return c;
}

// ---------------------------------------------------------------------------
// Decay experiment

json DecayReport::to_json() const {
  json diag{{"z", vec_json(z)},
            {"normal", vec_json(n)},
            {"positivity_exponent", positivity_exponent},
            {"fit", fit.to_json()},
            {"fit_window", {fit_t_min, fit_t_max}},
            {"shifted_window_slope", shifted_slope},
            {"window_sensitive", window_sensitive},
            {"skeleton_fraction", skeleton_fraction},
            {"mean_steps", mean_steps},
            {"status", status},
            {"note", note}};
  return json{{"predicted", beta_predicted},
              {"fitted", fit.slope},
              {"ci", {fit.ci_lo, fit.ci_hi}},
              {"rays", rays_json(rays)},
              {"diagnostics", diag}};
}

namespace {

void finish_fit(DecayReport& rep, int skip_largest) {
  // Rays are ordered by decreasing t; the window drops the `skip_largest` farthest ones and
  // every ray whose estimate is not clearly positive.
  std::vector<RayPoint> window;
  for (std::size_t i = static_cast<std::size_t>(std::max(0, skip_largest)); i < rep.rays.size(); ++i) {
    const auto& p = rep.rays[i];
    if (p.value > 2.0 * p.se) window.push_back(p);
  }
  if (window.size() < 4) {
    rep.status = "inconclusive";
    rep.note = "fewer than 4 ray points with estimates above twice their standard error";
    return;
  }
  rep.fit = fit_power_law(window);
  rep.fit_t_max = window.front().t;
  rep.fit_t_min = window.back().t;
  if (window.size() >= 5) {
    const std::vector<RayPoint> shifted(window.begin() + 1, window.end());
    rep.shifted_slope = fit_power_law(shifted).slope;
    const double half = 0.5 * (rep.fit.ci_hi - rep.fit.ci_lo);
    rep.window_sensitive = std::abs(rep.shifted_slope - rep.fit.slope) >= half;
  } else {
    rep.shifted_slope = rep.fit.slope;
  }
}

}  // namespace

DecayReport run_decay_experiment(const StableSpec& spec, DomainPtr dom, const Vec& z, const DecayConfig& cfg) {
  cfg.path.validate();
  const int d = spec.dim();
  if (dom->dim() != d || z.size() != d) throw InvalidArgument("decay experiment: dimension mismatch");
  DecayReport rep;
  const BoundaryFrame frame = boundary_frame(*dom, z);
  rep.z = z;
  rep.n = frame.n;
  rep.beta_predicted = decay_exponent(spec, frame.n);
  rep.positivity_exponent = beta(spec, frame.n);

  const DomainPtr local = framed_domain(dom, frame);
  const std::vector<double> t = cfg.t.empty() ? default_ray_distances(local->collar(), cfg.path.dt, spec.alpha) : cfg.t;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] < t[i - 1])) throw InvalidArgument("ray distances must decrease strictly");
  }
  if (!(t.front() < local->collar())) throw InvalidArgument("ray distances must lie inside the collar");
  const DomainPtr sim_dom = capped(local, cfg.cap, d);

  Payoff payoff;
  if (cfg.payoff.kind == PayoffSpec::Kind::FarIndicator) {
    const double r2 = cfg.payoff.radius * cfg.payoff.radius;
    payoff = [r2](const Vec& y) { return y.squaredNorm() > r2 ? 1.0 : 0.0; };
  } else {
    const double p = rep.beta_predicted;
    payoff = [p, d](const Vec& y) { return y[d - 1] > 0.0 ? std::pow(y[d - 1], p) : 0.0; };
  }

  const PathSimulator sim(spec.rotated(frame.rotation), cfg.path);
  double skel = 0.0, steps = 0.0;
  for (double tk : t) {
    const Vec x = tk * unit_vector(d, d - 1);
    // Stream offset 0 at every ray point: common random numbers across the ray.
    const auto est = harmonic_estimate(sim, *sim_dom, x, payoff, cfg.n_samples, 0, cfg.threads);
    rep.rays.push_back({tk, est.mean, est.std_error});
    skel += est.skeleton_fraction;
    steps += est.mean_steps;
  }
  rep.skeleton_fraction = skel / t.size();
  rep.mean_steps = steps / t.size();
  finish_fit(rep, cfg.fit_skip_largest);
  return rep;
}

DecayReport exact_decay_report(const std::vector<double>& t, const std::function<double(double)>& u,
                               double predicted) {
  DecayReport rep;
  rep.beta_predicted = predicted;
  for (double tk : t) rep.rays.push_back({tk, u(tk), 0.0});
  finish_fit(rep, 0);
  return rep;
}

// ---------------------------------------------------------------------------
// Harmonic reduction

json ReductionReport::to_json() const {
  json pts = json::array();
  for (const auto& p : points) {
    pts.push_back(json{{"x", vec_json(p.x)}, {"g", p.g}, {"g_r", p.g_r}, {"se", p.se}, {"ratio", p.ratio()}});
  }
  return json{{"r", r},
              {"points", pts},
              {"ratio_min", ratio_min},
              {"ratio_max", ratio_max},
              {"max_deviation", max_deviation},
              {"max_deviation_se", max_deviation_se},
              {"status", status},
              {"note", note}};
}

ReductionReport run_reduction_check(const StableSpec& spec, DomainPtr dom, const Vec& z, const PathConfig& cfg,
                                    double r, const std::vector<Vec>& points, long n_samples, int threads) {
  cfg.validate();
  if (!(r > 0.0 && r <= 0.25)) throw InvalidArgument("reduction radius must lie in (0, 1/4]");
  const int d = spec.dim();
  const BoundaryFrame frame = boundary_frame(*dom, z);
  const DomainPtr local = framed_domain(dom, frame);
  const StableSpec local_spec = spec.rotated(frame.rotation);
  const auto field = std::make_shared<BetaField>(local_spec.dual());
  // On a half-space g is the harmonic power itself, so it is not cut off.
  const auto shape = local->simple_shape();
  const bool flat = shape && shape->kind == SimpleShape::Kind::HalfSpace;
  const auto g = make_boundary_power(local, field, flat ? std::numeric_limits<double>::infinity() : 1.0);
  const DomainPtr dr = make_intersection({local, make_ball(Vec::Zero(d), r)});
  const PathSimulator sim(local_spec, cfg);
  const double floor = std::pow(cfg.dt, 1.0 / spec.alpha);

  ReductionReport rep;
  rep.r = r;
  rep.ratio_min = std::numeric_limits<double>::infinity();
  rep.ratio_max = -std::numeric_limits<double>::infinity();
  for (const auto& x : points) {
    if (x.size() != d || !dr->contains(x)) throw InvalidArgument("evaluation points must lie in D ∩ B(z, r)");
    if (local->delta(x) < floor) {
      rep.status = "inconclusive";
      rep.note = "an evaluation point is closer to the boundary than dt^(1/alpha)";
    }
    ReductionPoint p;
    p.x = x;
    p.g = g->value(x);
    const auto est = harmonic_estimate(sim, *dr, x, [&](const Vec& y) { return g->value(y); }, n_samples, 0, threads);
    p.g_r = est.mean;
    p.se = est.std_error;
    rep.ratio_min = std::min(rep.ratio_min, p.ratio());
    rep.ratio_max = std::max(rep.ratio_max, p.ratio());
    const double dev = std::abs(p.ratio() - 1.0);
    if (dev >= rep.max_deviation) {
      rep.max_deviation = dev;
      rep.max_deviation_se = p.ratio_se();
    }
    rep.points.push_back(p);
  }
  return rep;
}

bool ReductionSeries::passed(double factor) const {
  if (factors.empty()) return false;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (!(factors[i] <= factor) || !separated[i]) return false;
  }
  return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.status == "ok"; });
}

json ReductionSeries::to_json() const {
  json reps = json::array();
  for (const auto& r : reports) reps.push_back(r.to_json());
  return json{{"reports", reps},
              {"factors", factors},
              {"separated", separated},
              {"within_calibrated", within_calibrated},
              {"passed", passed()}};
}

ReductionSeries run_reduction_series(const StableSpec& spec, DomainPtr dom, const Vec& z, const PathConfig& cfg,
                                     const std::vector<double>& radii, const std::vector<Vec>& fractions,
                                     long n_samples, int threads) {
  ReductionSeries s;
  for (double r : radii) {
    std::vector<Vec> pts;
    for (const auto& f : fractions) pts.push_back(r * f);
    s.reports.push_back(run_reduction_check(spec, dom, z, cfg, r, pts, n_samples, threads));
  }
  for (std::size_t i = 1; i < s.reports.size(); ++i) {
    const auto& big = s.reports[i - 1];
    const auto& small = s.reports[i];
    s.factors.push_back(small.max_deviation / big.max_deviation);
    const double gap = big.max_deviation - small.max_deviation;
    s.separated.push_back(gap > 3.0 * std::hypot(big.max_deviation_se, small.max_deviation_se));
    // Calibrated tolerance ε(r) = 2 max|ratio - 1| at 2r.
    const double eps = 2.0 * big.max_deviation;
    bool inside = true;
    for (const auto& p : small.points) {
      inside = inside && p.ratio() - 3.0 * p.ratio_se() >= 1.0 - eps && p.ratio() + 3.0 * p.ratio_se() <= 1.0 + eps;
    }
    s.within_calibrated.push_back(inside);
  }
  return s;
}

}  // namespace sdecay
