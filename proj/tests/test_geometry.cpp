#include "sdecay/geometry.hpp"

#include "doctest.h"

#include <cmath>

using namespace sdecay;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

bool close(const Vec& a, const Vec& b, double tol) { return (a - b).norm() <= tol; }

}  // namespace

TEST_CASE("distance to the complement") {
  const auto ball = make_ball(v2(0, 0), 1.0);
  CHECK(ball->delta(v2(0, 0.5)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ball->delta(v2(0, 2)) == 0.0);
  const auto h = make_halfspace(v2(0, 0), v2(0, 1));
  CHECK(h->delta(v2(3, 0.2)) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(h->delta(v2(3, -0.2)) == 0.0);
  const auto e = make_ellipsoid(v2(0, 0), v2(2, 1));
  CHECK(e->delta(v2(0, 0.5)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(e->delta(v2(1.5, 0)) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("nearest boundary point") {
  const auto ball = make_ball(v2(0, 0), 1.0);
  auto bp = ball->nearest_boundary(v2(0, 0.6));
  CHECK(close(bp.z, v2(0, 1), 1e-15));
  CHECK(close(bp.n, v2(0, -1), 1e-15));
  const auto h = make_halfspace(v2(0, 0), v2(0, 1));
  bp = h->nearest_boundary(v2(7, 0.3));
  CHECK(close(bp.z, v2(7, 0), 1e-15));
  CHECK(close(bp.n, v2(0, 1), 1e-15));
  const auto e = make_ellipsoid(v2(0, 0), v2(2, 1));
  bp = e->nearest_boundary(v2(0, 0.6));
  CHECK(close(bp.z, v2(0, 1), 1e-12));
  CHECK(close(bp.n, v2(0, -1), 1e-12));
  CHECK_THROWS_AS(ball->nearest_boundary(v2(0, 0)), DomainError);
}

TEST_CASE("reconstruction and eikonal property in the collar") {
  std::vector<DomainPtr> doms = {make_ball(v2(0.3, -0.2), 1.5), make_ellipsoid(v2(0, 0), v2(2, 1)),
                                 make_perturbed_ball(v2(0, 0), 1.0, 0.02, 2)};
  for (const auto& dom : doms) {
    CAPTURE(dom->kind());
    const double collar = dom->collar();
    for (const auto& z : dom->boundary_samples(24)) {
      const Vec n = dom->normal_at(z);
      for (double frac : {0.05, 0.3, 0.8}) {
        const Vec x = z + frac * collar * n;
        const BoundaryPoint bp = dom->nearest_boundary(x);
        CHECK(close(bp.z + bp.delta * bp.n, x, 1e-10));
        CHECK(dom->delta(x) == doctest::Approx(bp.delta).epsilon(1e-12));
        const double h = 1e-5;
        const double deriv = (dom->delta(x + h * bp.n) - dom->delta(x - h * bp.n)) / (2 * h);
        CHECK(deriv == doctest::Approx(1.0).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("ball conditions hold at the stored radii") {
  std::vector<DomainPtr> doms = {make_ball(v2(0, 0), 1.0), make_ellipsoid(v2(1, 0), v2(1.5, 0.8)),
                                 make_perturbed_ball(v2(0, 0), 1.0, 0.01, 3)};
  for (const auto& dom : doms) {
    CAPTURE(dom->kind());
    const double ri = dom->interior_ball_radius();
    const double re = dom->exterior_ball_radius();
    const auto zs = dom->boundary_samples(32);
    for (const auto& z : zs) {
      const Vec n = dom->normal_at(z);
      const Vec ci = z + ri * n;
      for (int k = 0; k < 64; ++k) {
        const double a = 2 * kPi * k / 64;
        const Vec p = ci + 0.999 * ri * v2(std::cos(a), std::sin(a));
        CHECK(dom->contains(p));
        if (std::isfinite(re)) {
          const Vec q = z - re * n + 0.999 * re * v2(std::cos(a), std::sin(a));
          CHECK_FALSE(dom->contains(q));
        }
      }
    }
  }
}

TEST_CASE("normalizing frame") {
  SUBCASE("half-space at the origin is untouched") {
    const auto h = make_halfspace(v2(0, 0), v2(0, 1));
    const auto f = boundary_frame(*h, v2(0, 0));
    CHECK(f.scale == 1.0);
    CHECK((f.rotation - Mat::Identity(2, 2)).norm() < 1e-15);
  }
  SUBCASE("ball of radius 2 already normalized") {
    const auto b = make_ball(v2(0, 2), 2.0);
    const auto f = boundary_frame(*b, v2(0, 0));
    CHECK(f.scale == doctest::Approx(1.0));
    CHECK((f.rotation - Mat::Identity(2, 2)).norm() < 1e-15);
  }
  SUBCASE("unit ball gets scale 2") {
    const Vec c = v2(0.5, -1.0);
    const auto b = make_ball(c, 1.0);
    const Vec z = c + v2(std::cos(0.7), std::sin(0.7));
    const auto f = boundary_frame(*b, z);
    CHECK(f.scale == doctest::Approx(2.0));
    CHECK(close(f.to_local(z), Vec::Zero(2), 1e-14));
    CHECK(close(f.rotation * (c - z).normalized(), v2(0, 1), 1e-14));
    const auto local = framed_domain(b, f);
    CHECK(local->interior_ball_radius() >= 2.0 - 1e-12);
    CHECK(close(local->normal_at(Vec::Zero(2)), v2(0, 1), 1e-12));
    for (const Vec& x : {v2(0.3, 0.1), v2(-2, 5), v2(1e3, -4)}) CHECK(close(f.to_local(f.to_global(x)), x, 1e-12));
  }
  SUBCASE("off-boundary point is rejected") {
    const auto b = make_ball(v2(0, 0), 1.0);
    CHECK_THROWS_AS(boundary_frame(*b, v2(0, 0.9)), InvalidArgument);
  }
}

TEST_CASE("quadratic flatness inequality") {
  std::vector<Vec> grid;
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) {
      const Vec x = v2(-1 + 0.02 * i, 0.01 * j);
      if (x.norm() < 1.0) grid.push_back(x);
    }
  }
  const auto h = make_halfspace(v2(0, 0), v2(0, 1));
  CHECK(check_odl2(*h, grid) <= 1e-14);
  const auto ball = make_ball(v2(0, 2), 2.0);
  CHECK(check_odl2(*ball, grid) <= 1e-14);
  const auto e = make_ellipsoid(v2(0, 0), v2(1.5, 1.0));
  const Vec z = v2(0, -1.0);
  const auto f = boundary_frame(*e, z);
  CHECK(check_odl2(*framed_domain(e, f), grid) <= 1e-12);
}

TEST_CASE("domain JSON round trip") {
  const auto e = make_ellipsoid(v2(0.1, 0.2), v2(2, 1));
  const auto back = domain_from_json(e->to_json());
  CHECK(back->to_json() == e->to_json());
  CHECK(back->delta(v2(0.3, 0.4)) == e->delta(v2(0.3, 0.4)));
}
