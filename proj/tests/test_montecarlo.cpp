#include "sdecay/experiments.hpp"
#include "sdecay/montecarlo.hpp"
#include "sdecay/projection.hpp"

#include "doctest.h"
#include "support/oracles.hpp"

#include <cmath>

using namespace sdecay;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

StableSpec spec_of(double alpha, SphericalDensity theta) {
  StableSpec s;
  s.alpha = alpha;
  s.theta = std::move(theta);
  return s;
}

double positive_fraction(double alpha, double cp, double cm, double b, long n, std::uint64_t seed) {
  Rng rng(seed, 0);
  long pos = 0;
  for (long i = 0; i < n; ++i) pos += sample_stable_1d(alpha, cp, cm, b, 1.0, rng) > 0.0;
  return static_cast<double>(pos) / n;
}

}  // namespace

TEST_CASE("symmetric one-dimensional laws are balanced") {
  const long n = 1000000;
  CHECK(std::abs(positive_fraction(1.5, 1.0, 1.0, 0.0, n, 1) - 0.5) <= 3 * std::sqrt(0.25 / n));
  CHECK(std::abs(positive_fraction(1.0, 1.0, 1.0, 0.0, n, 2) - 0.5) <= 3 * std::sqrt(0.25 / n));
}

TEST_CASE("scale of the one-dimensional law from its characteristic function") {
  // Symmetric tails C |z|^{-1-α}: E cos(ξ Y_1) = exp(-2 C |ξ|^α k_α) with
  // k_α = ∫_0^∞ (1 - cos z) z^{-1-α} dz = -Γ(-α) cos(πα/2), and π/2 at α = 1.
  for (double a : {0.6, 1.0, 1.5}) {
    const double c = 0.7, xi = 0.8;
    const double k = a == 1.0 ? oracle::kPi / 2 : -std::tgamma(-a) * std::cos(oracle::kPi * a / 2);
    const double expected = std::exp(-2 * c * std::pow(xi, a) * k);
    Rng rng(5, 0);
    const long n = 400000;
    double s = 0.0;
    for (long i = 0; i < n; ++i) s += std::cos(xi * sample_stable_1d(a, c, c, 0.0, 1.0, rng));
    CAPTURE(a);
    CHECK(std::abs(s / n - expected) <= 4.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("CMS parameters reproduce the positivity exponent") {
  for (double a : {0.3, 0.6, 1.5, 1.8}) {
    for (double cm : {0.2, 1.0, 2.5}) {
      const StableParams p = stable_params(a, 1.0, cm);
      CHECK(a * positive_probability(a, p, 0.0) == doctest::Approx(oracle::beta_from_tails(a, 1.0, cm)).epsilon(1e-13));
    }
  }
  const StableParams p = stable_params(1.0, 0.8, 0.8);
  CHECK(positive_probability(1.0, p, 0.3) == doctest::Approx(oracle::beta_from_tails(1.0, 0.8, 0.8, 0.3)).epsilon(1e-14));
  CHECK_THROWS_AS(stable_params(1.0, 1.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(stable_params(1.5, 0.0, 0.0), InvalidArgument);
}

TEST_CASE("tilted projection matches the positivity exponent") {
  const StableSpec s = spec_of(1.5, SphericalDensity::cosine_tilt(2, 1.0, 0.5, v2(1, 0)));
  const DirectionalLaw law = directional_law(s, v2(1, 0));
  const long n = 1000000;
  const double p = positive_fraction(1.5, law.c_plus, law.c_minus, 0.0, n, 3);
  CHECK(std::abs(1.5 * p - law.beta) <= 3 * 1.5 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("projected increments follow the projected law") {
  const StableSpec s = spec_of(1.5, SphericalDensity::constant(2, 1.0));
  const PathConfig cfg;
  const PathSimulator sim(s, cfg);
  const long n = 20000;
  for (const Vec& u : {v2(1, 0), Vec(v2(1, 1) / std::sqrt(2.0))}) {
    const DirectionalLaw law = directional_law(s, u);
    std::vector<double> a, b;
    Rng r1(7, 1), r2(7, 2);
    for (long i = 0; i < n; ++i) {
      a.push_back(u.dot(sim.increment(0.01, r1)));
      b.push_back(sample_stable_1d(1.5, law.c_plus, law.c_minus, 0.0, 0.01, r2));
    }
    const KsResult ks = ks_two_sample(a, b);
    CHECK(ks.statistic == doctest::Approx(oracle::ks_statistic(a, b)).epsilon(1e-15));
    CHECK(ks.p_value > 0.01);
  }
}

TEST_CASE("exits from a ball") {
  const StableSpec s = spec_of(1.5, SphericalDensity::constant(2, 1.0));
  PathSimulator sim(s, PathConfig{});
  const auto ball = make_ball(v2(0, 0), 1.0);
  long skeleton = 0;
  const long n = 2000;
  for (long i = 0; i < n; ++i) {
    Rng rng(9, static_cast<std::uint64_t>(i));
    const ExitSample e = sim.sample_exit(*ball, v2(0, 0), rng);
    CHECK_FALSE(ball->contains(e.exit_point));
    CHECK(e.exit_time > 0.0);
    skeleton += e.exited_by == ExitSample::By::SkeletonStep;
  }
  CHECK(static_cast<double>(skeleton) / n < 0.05);
  Rng outside(1, 1);
  CHECK_THROWS_AS(sim.sample_exit(*ball, v2(0, 2), outside), InvalidArgument);
}

TEST_CASE("mean exit time is stable under time-step halving") {
  const StableSpec s = spec_of(0.8, SphericalDensity::constant(2, 1.0));
  const auto ball = make_ball(v2(0, 0), 1.0);
  double mean[2];
  for (int k = 0; k < 2; ++k) {
    PathConfig cfg;
    cfg.dt = k == 0 ? 1e-3 : 5e-4;
    PathSimulator sim(s, cfg);
    double t = 0.0;
    const long n = 20000;
    for (long i = 0; i < n; ++i) {
      Rng rng(13, static_cast<std::uint64_t>(i));
      t += sim.sample_exit(*ball, v2(0.2, 0.1), rng).exit_time;
    }
    mean[k] = t / n;
  }
  CHECK(std::isfinite(mean[0]));
  CHECK(std::abs(mean[1] / mean[0] - 1.0) < 0.05);
}

TEST_CASE("harmonic estimates") {
  const StableSpec s = spec_of(1.5, SphericalDensity::cosine_tilt(2, 1.0, 0.5, v2(0, -1)));
  const auto h = make_halfspace(v2(0, 0), v2(0, 1));
  const auto cap = make_intersection({h, make_halfspace(v2(0, 1), v2(0, -1))});
  const PathSimulator sim(s, PathConfig{});

  SUBCASE("unit payoff has no variance") {
    const auto est = harmonic_estimate(sim, *cap, v2(0, 0.3), [](const Vec&) { return 1.0; }, 200);
    CHECK(est.mean == 1.0);
    CHECK(est.std_error == 0.0);
  }
  SUBCASE("the half-space power is reproduced") {
    const double p = decay_exponent(s, v2(0, 1));
    const auto payoff = [p](const Vec& y) { return y[1] > 0 ? std::pow(y[1], p) : 0.0; };
    const auto est = harmonic_estimate(sim, *cap, v2(0, 0.5), payoff, 20000);
    CHECK(std::abs(est.mean - std::pow(0.5, p)) <= 3 * est.std_error + 0.01);
  }
  SUBCASE("results do not depend on the thread count") {
    const auto payoff = [](const Vec& y) { return y[1] > 1 ? 1.0 : 0.0; };
    const auto a = harmonic_estimate(sim, *cap, v2(0, 0.5), payoff, 3000, 0, 1);
    const auto b = harmonic_estimate(sim, *cap, v2(0, 0.5), payoff, 3000, 0, 3);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
  }
}
