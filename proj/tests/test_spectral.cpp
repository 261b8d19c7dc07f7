#include "sdecay/spectral.hpp"

#include "doctest.h"

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

const ValidationItem* find_item(const ValidationReport& r, const std::string& name) {
  for (const auto& i : r.items) {
    if (i.name == name) return &i;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("density evaluation") {
  const auto c = SphericalDensity::constant(2, 1.0);
  CHECK(c(v2(0.6, 0.8)) == 1.0);
  const auto t = SphericalDensity::cosine_tilt(2, 1.0, 0.5, v2(1, 0));
  CHECK(t(v2(1, 0)) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(t(v2(-1, 0)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(t(v2(1.0, 1e-3)), InvalidArgument);
}

TEST_CASE("tilt parameters are checked") {
  CHECK_THROWS_AS(SphericalDensity::cosine_tilt(2, 1.0, 1.0, v2(1, 0)), InvalidArgument);
  CHECK_THROWS_AS(SphericalDensity::cosine_tilt(2, 1.0, 0.5, v2(2, 0)), InvalidArgument);
}

TEST_CASE("Levy density") {
  const StableSpec iso = spec_of(1.5, SphericalDensity::constant(2, 1.0));
  CHECK(levy_density(iso, v2(2, 0)) == doctest::Approx(std::pow(2.0, -3.5)).epsilon(1e-14));
  const StableSpec tilt = spec_of(0.5, SphericalDensity::cosine_tilt(2, 1.0, 0.5, v2(1, 0)));
  CHECK(levy_density(tilt, v2(0, 3)) == doctest::Approx(std::pow(3.0, -2.5)).epsilon(1e-14));
  CHECK_THROWS_AS(levy_density(tilt, v2(0, 0)), InvalidArgument);

  SUBCASE("homogeneity") {
    const Vec x0 = v2(0.3, -0.7);
    for (double lam : {0.1, 0.5, 3.0, 17.0}) {
      const double ratio = levy_density(tilt, lam * x0) / levy_density(tilt, x0);
      CHECK(ratio == doctest::Approx(std::pow(lam, -2.5)).epsilon(1e-12));
    }
  }
}

TEST_CASE("spec validation") {
  SUBCASE("alpha = 1 needs a symmetric density") {
    const auto rep = validate_spec(spec_of(1.0, SphericalDensity::cosine_tilt(2, 1.0, 0.5, v2(1, 0))));
    CHECK_FALSE(rep.ok());
    const auto* item = find_item(rep, "symmetric");
    REQUIRE(item != nullptr);
    CHECK_FALSE(item->passed);
    CHECK(item->witness.has_value());
  }
  SUBCASE("drift only at alpha = 1") {
    StableSpec s = spec_of(1.5, SphericalDensity::constant(2, 1.0));
    s.gamma = v2(0.3, 0.0);
    const auto rep = validate_spec(s);
    CHECK_FALSE(rep.ok());
    CHECK_FALSE(find_item(rep, "drift")->passed);
  }
  SUBCASE("symmetric alpha = 1 with drift passes") {
    StableSpec s = spec_of(1.0, SphericalDensity::constant(2, 1.0));
    s.gamma = v2(0.3, 0.0);
    CHECK(validate_spec(s).ok());
  }
  SUBCASE("alpha next to 1 is rejected") {
    CHECK_FALSE(validate_spec(spec_of(1.0 + 1e-10, SphericalDensity::constant(2, 1.0))).ok());
  }
  SUBCASE("passing specs are positive on the grid") {
    const StableSpec s = spec_of(0.7, SphericalDensity::bump_plus_floor(3, 0.2, 2.0, Vec::Unit(3, 2), 5.0, false));
    REQUIRE(validate_spec(s).ok());
    for (const auto& w : direction_grid(3, 2000)) CHECK(s.theta(w) > 0.0);
  }
}

TEST_CASE("tabulated densities") {
  std::vector<double> angles, values;
  for (int i = 0; i < 8; ++i) {
    angles.push_back(i * 2.0 * kPi / 8);
    values.push_back(1.0 + 0.5 * std::cos(angles.back()));
  }
  const auto tab = SphericalDensity::tabulated_circle(angles, values);
  CHECK(tab(v2(1, 0)) == doctest::Approx(1.5));
  // Halfway between the nodes at 0 and pi/4: linear in angle.
  const double mid = kPi / 8;
  CHECK(tab(v2(std::cos(mid), std::sin(mid))) == doctest::Approx(0.5 * (values[0] + values[1])).epsilon(1e-12));
  for (const auto& w : direction_grid(2, 500)) CHECK(tab(w) >= 0.5 - 1e-12);
}

TEST_CASE("rotation and dual") {
  const StableSpec s = spec_of(1.5, SphericalDensity::cosine_tilt(2, 1.0, 0.5, v2(1, 0)));
  const StableSpec d = s.dual();
  for (const auto& w : direction_grid(2, 64)) CHECK(d.theta(w) == doctest::Approx(s.theta(-w)).epsilon(1e-14));
  Mat r(2, 2);
  r << 0, -1, 1, 0;  // quarter turn
  const StableSpec rs = s.rotated(r);
  for (const auto& w : direction_grid(2, 64)) {
    CHECK(rs.theta(r * w) == doctest::Approx(s.theta(w)).epsilon(1e-14));
  }
}

TEST_CASE("JSON round trip is exact for closed-form kinds") {
  StableSpec s = spec_of(1.0, SphericalDensity::constant(3, 0.7));
  s.gamma = (Vec(3) << 0.1, -0.2, 0.30000000000000004).finished();
  const StableSpec back = StableSpec::from_json(s.to_json());
  CHECK(back.to_json().dump() == s.to_json().dump());
  const StableSpec t = spec_of(0.6, SphericalDensity::cosine_tilt(2, 1.0, 0.1 + 0.2, v2(0.6, 0.8)));
  CHECK(StableSpec::from_json(t.to_json()).to_json() == t.to_json());
}
