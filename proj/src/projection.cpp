#include "sdecay/projection.hpp"

#include "sdecay/quadrature.hpp"
#include "sdecay/rng.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sdecay {

using nlohmann::json;

json QuadConfig::to_json() const {
  return json{{"tol", tol},
              {"tabulated_tol", tabulated_tol},
              {"panels", panels},
              {"grading_levels", grading_levels},
              {"max_refinements", max_refinements},
              {"azimuth_nodes", azimuth_nodes},
              {"qmc_points", qmc_points},
              {"qmc_shifts", qmc_shifts},
              {"qmc_seed", qmc_seed}};
}

QuadConfig QuadConfig::from_json(const json& j) {
  QuadConfig q;
  q.tol = j.value("tol", q.tol);
  q.tabulated_tol = j.value("tabulated_tol", q.tabulated_tol);
  q.panels = j.value("panels", q.panels);
  q.grading_levels = j.value("grading_levels", q.grading_levels);
  q.max_refinements = j.value("max_refinements", q.max_refinements);
  q.azimuth_nodes = j.value("azimuth_nodes", q.azimuth_nodes);
  q.qmc_points = j.value("qmc_points", q.qmc_points);
  q.qmc_shifts = j.value("qmc_shifts", q.qmc_shifts);
  q.qmc_seed = j.value("qmc_seed", q.qmc_seed);
  return q;
}

namespace {

constexpr double kHalfPi = 0.5 * kPi;

double wrap_to_pi(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

double circle_integral(const SphericalDensity& theta, double p, const Vec& u, int panels, int levels) {
  Vec perp(2);
  perp << -u[1], u[0];
  auto breaks = quad::graded_breaks_two_sided(-kHalfPi, kHalfPi, levels, panels);
  const double base = std::atan2(u[1], u[0]);
  for (double a : theta.kink_angles()) {
    const double phi = wrap_to_pi(a - base);
    if (phi > -kHalfPi && phi < kHalfPi) breaks.push_back(phi);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  auto f = [&](double phi) {
    const double c = std::cos(phi);
    if (c <= 0.0) return 0.0;
    Vec w = c * u + std::sin(phi) * perp;
    return theta.eval_unchecked(w) * std::pow(c, p);
  };
  return quad::composite_gauss_legendre(f, breaks);
}

double sphere_integral(const SphericalDensity& theta, double p, const Vec& u, int panels, int levels, int n_az) {
  // Polar distance s from the equator: w = sin(s) u + cos(s) (cos(phi) e1 + sin(phi) e2).
  const Mat q = rotation_to_last_axis(u);
  const Vec e1 = q.row(0).transpose();
  const Vec e2 = q.row(1).transpose();
  const auto breaks = quad::graded_breaks_toward_left(0.0, kHalfPi, levels, panels);
  const double dphi = 2.0 * kPi / n_az;
  auto ring = [&](double s) {
    const double ss = std::sin(s), cs = std::cos(s);
    if (ss <= 0.0) return 0.0;
    double sum = 0.0;
    for (int k = 0; k < n_az; ++k) {
      const double phi = (k + 0.5) * dphi;
      Vec w = ss * u + cs * (std::cos(phi) * e1 + std::sin(phi) * e2);
      sum += theta.eval_unchecked(w);
    }
    return sum * dphi * std::pow(ss, p) * cs;
  };
  return quad::composite_gauss_legendre(ring, breaks);
}

}  // namespace

HemisphereIntegral hemisphere_integral(const SphericalDensity& theta, double p, const Vec& u_in,
                                       const QuadConfig& quad) {
  const int d = theta.dim();
  if (u_in.size() != d) throw InvalidArgument("direction has wrong dimension");
  require_unit(u_in, 1e-12, "projection direction");
  const Vec u = u_in.normalized();
  const double tol = theta.is_tabulated() ? std::max(quad.tol, quad.tabulated_tol) : quad.tol;

  if (d == 2 || d == 3) {
    const int max_ref = d == 2 ? quad.max_refinements : std::min(quad.max_refinements, 3);
    auto eval = [&](int k) {
      const int panels = quad.panels << k;
      return d == 2 ? circle_integral(theta, p, u, panels, quad.grading_levels)
                    : sphere_integral(theta, p, u, panels, quad.grading_levels, quad.azimuth_nodes << k);
    };
    double coarse = eval(0);
    for (int k = 1; k <= max_ref; ++k) {
      const double fine = eval(k);
      const double err = std::abs(fine - coarse);
      if (err <= tol * std::abs(fine)) return {fine, err};
      coarse = fine;
      if (k == max_ref) {
        std::ostringstream msg;
        msg << "hemisphere quadrature missed relative tolerance " << tol << " (error " << err << ")";
        throw NumericFailure(msg.str(), fine, err);
      }
    }
    return {coarse, 0.0};
  }

  // d >= 4: randomly shifted Halton points mapped to the sphere.
  const double area = sphere_area(d);
  const boost::math::normal_distribution<double> normal;
  std::vector<double> means;
  for (int s = 0; s < quad.qmc_shifts; ++s) {
    Rng rng(quad.qmc_seed, static_cast<std::uint64_t>(s));
    Vec shift(d);
    for (int k = 0; k < d; ++k) shift[k] = rng.uniform();
    double sum = 0.0;
    for (int i = 1; i <= quad.qmc_points; ++i) {
      Vec g(d);
      for (int k = 0; k < d; ++k) {
        double x = radical_inverse(static_cast<std::uint64_t>(i), nth_prime(k)) + shift[k];
        x -= std::floor(x);
        x = std::clamp(x, 1e-16, 1.0 - 1e-16);
        g[k] = boost::math::quantile(normal, x);
      }
      const Vec w = g.normalized();
      const double c = w.dot(u);
      if (c > 0.0) sum += theta.eval_unchecked(w) * std::pow(c, p);
    }
    means.push_back(area * sum / quad.qmc_points);
  }
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(means.size());
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= static_cast<double>(means.size() * (means.size() - 1));
  return {mean, std::sqrt(var)};
}

double c_plus(const StableSpec& spec, const Vec& u, const QuadConfig& quad) {
  return hemisphere_integral(spec.theta, spec.alpha, u, quad).value;
}

double c_minus(const StableSpec& spec, const Vec& u, const QuadConfig& quad) { return c_plus(spec, -u, quad); }

double beta_from_constants(double alpha, double cp, double cm, double drift_b) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw InvalidArgument("alpha must lie in (0, 2)");
  if (!(cp >= 0.0 && cm >= 0.0 && cp + cm > 0.0)) throw InvalidArgument("projected constants must be nonnegative");
  if (alpha == 1.0) {
    // Levy density C |z|^{-2} on both half-lines is a Cauchy law with scale pi C.
    const double c = 0.5 * (cp + cm);
    return 0.5 + std::atan(drift_b / (kPi * c)) / kPi;
  }
  if (std::abs(alpha - 1.0) < 1e-8) {
    throw InvalidArgument("alpha within 1e-8 of 1: use the alpha = 1 branch exactly");
  }
  const double rho = (cp - cm) / (cp + cm);
  return 0.5 * alpha + std::atan(rho * std::tan(0.5 * alpha * kPi)) / kPi;
}

double dbeta_drho(double alpha, double rho) {
  const double t = std::tan(0.5 * alpha * kPi);
  return t / (kPi * (1.0 + rho * rho * t * t));
}

DirectionalLaw directional_law(const StableSpec& spec, const Vec& u, const QuadConfig& quad) {
  DirectionalLaw law;
  law.u = u;
  const auto plus = hemisphere_integral(spec.theta, spec.alpha, u, quad);
  const auto minus = hemisphere_integral(spec.theta, spec.alpha, -u, quad);
  law.c_plus = plus.value;
  law.c_minus = minus.value;
  law.c_plus_err = plus.error;
  law.c_minus_err = minus.error;
  double b = 0.0;
  if (spec.alpha == 1.0) {
    b = spec.gamma ? spec.gamma->dot(u) : 0.0;
    law.drift_b = b;
  }
  law.beta = beta_from_constants(spec.alpha, law.c_plus, law.c_minus, b);

  const double s = law.c_plus + law.c_minus;
  if (spec.alpha == 1.0) {
    const double c = 0.5 * s;
    const double x = b / (kPi * c);
    const double dc = 0.5 * (plus.error + minus.error);
    law.beta_err = std::abs(x / c) * dc / (kPi * (1.0 + x * x));
  } else {
    const double rho = (law.c_plus - law.c_minus) / s;
    // delta method: d rho = (2 C- dC+ - 2 C+ dC-) / s^2
    const double drho = 2.0 * (law.c_minus * plus.error + law.c_plus * minus.error) / (s * s);
    law.beta_err = std::abs(dbeta_drho(spec.alpha, rho)) * drho;
  }
  return law;
}

double beta(const StableSpec& spec, const Vec& u, const QuadConfig& quad) {
  return directional_law(spec, u, quad).beta;
}

double decay_exponent(const StableSpec& spec, const Vec& inward_normal, const QuadConfig& quad) {
  return beta(spec, -inward_normal, quad);
}

BetaBounds beta_bounds(const StableSpec& spec, const QuadConfig& quad, int n_dirs) {
  if (n_dirs < 128) throw InvalidArgument("beta_bounds needs at least 128 directions");
  BetaBounds out;
  out.beta_min = std::numeric_limits<double>::infinity();
  out.beta_max = -out.beta_min;
  for (const auto& u : direction_grid(spec.dim(), n_dirs)) {
    const double b = beta(spec, u, quad);
    if (b < out.beta_min) out.beta_min = b, out.argmin_u = u;
    if (b > out.beta_max) out.beta_max = b, out.argmax_u = u;
  }
  return out;
}

double projected_density(const StableSpec& spec, const Vec& u, double z, const QuadConfig& quad) {
  if (z == 0.0 || !std::isfinite(z)) throw InvalidArgument("projected density needs a finite nonzero argument");
  const double c = z > 0 ? c_plus(spec, u, quad) : c_minus(spec, u, quad);
  return c * std::pow(std::abs(z), -1.0 - spec.alpha);
}

// ---------------------------------------------------------------------------
// BetaField

struct BetaField::Impl {
  // d = 2
  std::unique_ptr<boost::math::interpolators::cardinal_cubic_b_spline<double>> spline;
  // d = 3
  std::unique_ptr<GeodesicGrid> grid;
  std::vector<double> values;
};

BetaField::~BetaField() = default;

BetaField::BetaField(const StableSpec& spec, const QuadConfig& quad, int resolution) : dim_(spec.dim()) {
  auto impl = std::make_shared<Impl>();
  if (dim_ == 2) {
    const int n = resolution > 0 ? resolution : 2048;
    const int pad = 8;
    const double h = 2.0 * kPi / n;
    std::vector<double> base(n);
    for (int j = 0; j < n; ++j) {
      Vec u(2);
      u << std::cos(j * h), std::sin(j * h);
      base[j] = beta(spec, u, quad);
    }
    std::vector<double> padded;
    for (int j = -pad; j < n + pad; ++j) padded.push_back(base[((j % n) + n) % n]);
    impl->spline = std::make_unique<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
        padded.begin(), padded.end(), -pad * h, h);
  } else if (dim_ == 3) {
    const int level = resolution > 0 ? resolution : 4;
    impl->grid = std::make_unique<GeodesicGrid>(level);
    for (const auto& v : impl->grid->vertices()) impl->values.push_back(beta(spec, Vec(v), quad));
  } else {
    throw InvalidArgument("exponent tables are available for d = 2 and d = 3 only");
  }
  impl_ = std::move(impl);
}

double BetaField::operator()(const Vec& n) const {
  if (dim_ == 2) {
    double a = std::atan2(n[1], n[0]);
    if (a < 0) a += 2.0 * kPi;
    return (*impl_->spline)(a);
  }
  return impl_->grid->interpolate(impl_->values, Eigen::Vector3d(n[0], n[1], n[2]));
}

}  // namespace sdecay
