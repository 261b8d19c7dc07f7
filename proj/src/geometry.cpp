#include "sdecay/geometry.hpp"

#include "sdecay/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sdecay {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec vec_from_json(const json& j) {
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

json vec_to_json(const Vec& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

void require_dims(const Vec& x, int d) {
  if (x.size() != d) throw InvalidArgument("point has wrong dimension");
}

void check_collar(const Domain& dom, double delta) {
  if (!(delta < dom.collar())) {
    std::ostringstream msg;
    msg << "point at distance " << delta << " lies outside the collar (" << dom.collar()
        << "); nearest boundary point may not be unique";
    throw DomainError(msg.str());
  }
}

// ---------------------------------------------------------------------------

class HalfSpace final : public Domain {
 public:
  HalfSpace(Vec p, Vec n) : p_(std::move(p)), n_(std::move(n)) {}
  int dim() const override { return static_cast<int>(p_.size()); }
  std::string kind() const override { return "half-space"; }
  bool contains(const Vec& x) const override { return (x - p_).dot(n_) > 0.0; }
  double delta(const Vec& x) const override { return std::max(0.0, (x - p_).dot(n_)); }
  BoundaryPoint nearest_boundary(const Vec& x) const override {
    require_dims(x, dim());
    const double s = (x - p_).dot(n_);
    if (s < -1e-12) throw DomainError("nearest_boundary: exterior point");
    const double d = std::max(0.0, s);
    return {x - s * n_, n_, d};
  }
  Vec normal_at(const Vec&) const override { return n_; }
  double boundary_residual(const Vec& z) const override { return std::abs((z - p_).dot(n_)); }
  double interior_ball_radius() const override { return kInf; }
  double exterior_ball_radius() const override { return kInf; }
  std::vector<Vec> boundary_samples(int n) const override {
    const Mat q = rotation_to_last_axis(n_);
    std::vector<Vec> out;
    const int d = dim();
    for (int i = 0; i < n; ++i) {
      Vec t = Vec::Zero(d);
      for (int k = 0; k + 1 < d; ++k) t[k] = 2.0 * radical_inverse(i + 1, nth_prime(k)) - 1.0;
      out.push_back(p_ + q.transpose() * t);
    }
    return out;
  }
  json to_json() const override {
    return json{{"kind", kind()}, {"point", vec_to_json(p_)}, {"normal", vec_to_json(n_)}};
  }
  std::optional<SimpleShape> simple_shape() const override {
    return SimpleShape{SimpleShape::Kind::HalfSpace, p_, n_, kInf};
  }

 private:
  Vec p_, n_;
};

class Ball final : public Domain {
 public:
  Ball(Vec c, double r) : c_(std::move(c)), r_(r) {}
  int dim() const override { return static_cast<int>(c_.size()); }
  std::string kind() const override { return "ball"; }
  bool contains(const Vec& x) const override { return (x - c_).squaredNorm() < r_ * r_; }
  double delta(const Vec& x) const override { return std::max(0.0, r_ - (x - c_).norm()); }
  BoundaryPoint nearest_boundary(const Vec& x) const override {
    require_dims(x, dim());
    const Vec y = x - c_;
    const double rho = y.norm();
    if (rho > r_ * (1.0 + 1e-12)) throw DomainError("nearest_boundary: exterior point");
    const double d = std::max(0.0, r_ - rho);
    check_collar(*this, d);
    const Vec dir = y / rho;
    return {c_ + r_ * dir, -dir, d};
  }
  Vec normal_at(const Vec& z) const override { return (c_ - z).normalized(); }
  double boundary_residual(const Vec& z) const override { return std::abs((z - c_).norm() - r_); }
  double interior_ball_radius() const override { return r_; }
  double exterior_ball_radius() const override { return kInf; }
  std::vector<Vec> boundary_samples(int n) const override {
    std::vector<Vec> out;
    for (const auto& w : direction_grid(dim(), n)) out.push_back(c_ + r_ * w);
    return out;
  }
  json to_json() const override { return json{{"kind", kind()}, {"center", vec_to_json(c_)}, {"radius", r_}}; }
  std::optional<SimpleShape> simple_shape() const override {
    return SimpleShape{SimpleShape::Kind::Ball, c_, Vec::Zero(dim()), r_};
  }

 private:
  Vec c_;
  double r_;
};

class Ellipsoid final : public Domain {
 public:
  Ellipsoid(Vec c, Vec a) : c_(std::move(c)), a_(std::move(a)) {
    amin_ = a_.minCoeff();
    amax_ = a_.maxCoeff();
  }
  int dim() const override { return static_cast<int>(c_.size()); }
  std::string kind() const override { return "ellipsoid"; }
  bool contains(const Vec& x) const override { return (x - c_).cwiseQuotient(a_).squaredNorm() < 1.0; }

  double delta(const Vec& x) const override {
    if (!contains(x)) return 0.0;
    return project(x - c_).second;
  }

  BoundaryPoint nearest_boundary(const Vec& x) const override {
    require_dims(x, dim());
    const Vec y = x - c_;
    if (y.cwiseQuotient(a_).squaredNorm() > 1.0 + 1e-12) throw DomainError("nearest_boundary: exterior point");
    auto [p, d] = project(y);
    check_collar(*this, d);
    const Vec z = c_ + p;
    return {z, normal_at(z), d};
  }

  Vec normal_at(const Vec& z) const override {
    const Vec y = z - c_;
    Vec g(dim());
    for (int i = 0; i < dim(); ++i) g[i] = -y[i] / (a_[i] * a_[i]);
    return g.normalized();
  }
  double boundary_residual(const Vec& z) const override {
    return std::abs((z - c_).cwiseQuotient(a_).norm() - 1.0) * amin_;
  }
  double interior_ball_radius() const override { return amin_ * amin_ / amax_; }
  double exterior_ball_radius() const override { return kInf; }
  std::vector<Vec> boundary_samples(int n) const override {
    std::vector<Vec> out;
    for (const auto& w : direction_grid(dim(), n)) {
      const Vec y = w.cwiseProduct(a_);
      out.push_back(c_ + y / y.cwiseQuotient(a_).norm());
    }
    return out;
  }
  json to_json() const override {
    return json{{"kind", kind()}, {"center", vec_to_json(c_)}, {"semi_axes", vec_to_json(a_)}};
  }

 private:
  // Nearest boundary point of an interior point y (centred coordinates): p_i = a_i^2 y_i / (a_i^2 + t)
  // with t the unique root in (-amin^2, 0] of F(t) = sum (a_i y_i / (a_i^2 + t))^2 - 1.
  std::pair<Vec, double> project(const Vec& y) const {
    const int d = dim();
    const Vec ay = a_.cwiseProduct(y.cwiseAbs());
    const Vec a2 = a_.cwiseProduct(a_);
    auto F = [&](double t, double* dF) {
      double f = -1.0, df = 0.0;
      for (int i = 0; i < d; ++i) {
        const double q = ay[i] / (a2[i] + t);
        f += q * q;
        df -= 2.0 * q * q / (a2[i] + t);
      }
      if (dF) *dF = df;
      return f;
    };
    const double lo0 = -amin_ * amin_;
    double lo = lo0, hi = 0.0;
    // Degenerate: no pole on the smallest axis and F stays negative there.
    const double probe = lo0 * (1.0 - 1e-15);
    if (F(probe, nullptr) <= 0.0) {
      Vec p(d);
      double rest = 0.0;
      int imin = 0;
      for (int i = 0; i < d; ++i) {
        if (a2[i] > a2[imin]) continue;
        imin = i;
      }
      for (int i = 0; i < d; ++i) {
        if (i == imin) continue;
        p[i] = a2[i] * y[i] / (a2[i] - a2[imin]);
        rest += (p[i] / a_[i]) * (p[i] / a_[i]);
      }
      p[imin] = a_[imin] * std::sqrt(std::max(0.0, 1.0 - rest));
      if (y[imin] < 0) p[imin] = -p[imin];
      return {p, (p - y).norm()};
    }
    double t = 0.0;
    bool done = false;
    for (int it = 0; it < 64 * 4 && !done; ++it) {
      double df = 0.0;
      const double f = F(t, &df);
      if (std::abs(f) <= 1e-12 * 0.5) {
        done = true;
        break;
      }
      if (f > 0) lo = t; else hi = t;
      double next = t - f / df;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) <= 1e-16 * (1.0 + std::abs(t))) {
        t = next;
        done = true;
        break;
      }
      t = next;
    }
    if (!done && std::abs(F(t, nullptr)) > 1e-10) {
      throw NumericFailure("ellipsoid projection did not converge", t, std::abs(F(t, nullptr)));
    }
    Vec p(d);
    for (int i = 0; i < d; ++i) p[i] = a2[i] * y[i] / (a2[i] + t);
    return {p, (p - y).norm()};
  }

  Vec c_, a_;
  double amin_, amax_;
};

class PerturbedBall final : public Domain {
 public:
  PerturbedBall(Vec c, double r0, double a, int k, double phase) : c_(std::move(c)), r0_(r0), a_(a), k_(k), ph_(phase) {
    double kmax = 0.0, kmin = kInf;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double kap = curvature(2.0 * kPi * i / n);
      kmax = std::max(kmax, kap);
      kmin = std::min(kmin, kap);
    }
    if (!(kmin > 0.0)) throw InvalidArgument("perturbed ball is not convex");
    rin_ = 0.9 / kmax;
  }
  int dim() const override { return 2; }
  std::string kind() const override { return "perturbed-ball"; }

  double radius(double phi) const { return r0_ * (1.0 + a_ * std::cos(k_ * (phi - ph_))); }
  double radius_d1(double phi) const { return -r0_ * a_ * k_ * std::sin(k_ * (phi - ph_)); }
  double radius_d2(double phi) const { return -r0_ * a_ * k_ * k_ * std::cos(k_ * (phi - ph_)); }
  double curvature(double phi) const {
    const double r = radius(phi), r1 = radius_d1(phi), r2 = radius_d2(phi);
    return (r * r + 2 * r1 * r1 - r * r2) / std::pow(r * r + r1 * r1, 1.5);
  }
  Vec point(double phi) const {
    Vec p(2);
    p << std::cos(phi), std::sin(phi);
    return c_ + radius(phi) * p;
  }

  bool contains(const Vec& x) const override {
    const Vec y = x - c_;
    return y.norm() < radius(std::atan2(y[1], y[0]));
  }

  double delta(const Vec& x) const override {
    if (!contains(x)) return 0.0;
    return std::get<1>(project(x));
  }

  BoundaryPoint nearest_boundary(const Vec& x) const override {
    require_dims(x, 2);
    const Vec y = x - c_;
    if (y.norm() > radius(std::atan2(y[1], y[0])) * (1.0 + 1e-12)) {
      throw DomainError("nearest_boundary: exterior point");
    }
    auto [phi, d] = project(x);
    check_collar(*this, d);
    const Vec z = point(phi);
    return {z, normal_param(phi), d};
  }

  Vec normal_at(const Vec& z) const override {
    const Vec y = z - c_;
    return normal_param(std::atan2(y[1], y[0]));
  }
  double boundary_residual(const Vec& z) const override {
    const Vec y = z - c_;
    return std::abs(y.norm() - radius(std::atan2(y[1], y[0])));
  }
  double interior_ball_radius() const override { return rin_; }
  double exterior_ball_radius() const override { return kInf; }
  std::vector<Vec> boundary_samples(int n) const override {
    std::vector<Vec> out;
    for (int i = 0; i < n; ++i) out.push_back(point(2.0 * kPi * i / n));
    return out;
  }
  json to_json() const override {
    return json{{"kind", kind()}, {"center", vec_to_json(c_)}, {"r0", r0_}, {"amplitude", a_}, {"k", k_},
                {"phase", ph_}};
  }

 private:
  Vec normal_param(double phi) const {
    Vec t(2);
    const double r = radius(phi), r1 = radius_d1(phi);
    t << r1 * std::cos(phi) - r * std::sin(phi), r1 * std::sin(phi) + r * std::cos(phi);
    Vec n(2);
    n << -t[1], t[0];
    return n.normalized();
  }

  // Stationarity of |p(phi) - x|^2: g(phi) = <p(phi) - x, p'(phi)> = 0.
  std::pair<double, double> newton(const Vec& x, double phi) const {
    for (int it = 0; it < 64; ++it) {
      const double r = radius(phi), r1 = radius_d1(phi), r2 = radius_d2(phi);
      const double c = std::cos(phi), s = std::sin(phi);
      Vec p(2), p1(2), p2(2);
      p << c_[0] + r * c, c_[1] + r * s;
      p1 << r1 * c - r * s, r1 * s + r * c;
      p2 << r2 * c - 2 * r1 * s - r * c, r2 * s + 2 * r1 * c - r * s;
      const Vec e = p - x;
      const double g = e.dot(p1);
      const double dg = p1.squaredNorm() + e.dot(p2);
      if (!(dg > 0.0)) break;
      const double step = g / dg;
      phi -= std::clamp(step, -0.5, 0.5);
      if (std::abs(step) < 1e-14) break;
    }
    return {phi, (point(phi) - x).norm()};
  }

  std::pair<double, double> project(const Vec& x) const {
    const Vec y = x - c_;
    const double phi0 = std::atan2(y[1], y[0]);
    const double radial_gap = radius(phi0) - y.norm();
    if (radial_gap < 0.5 * rin_) {
      auto res = newton(x, phi0);
      if (res.second <= radial_gap + 1e-12) return res;
    }
    const int n = 720;
    double best_phi = 0.0, best = kInf;
    for (int i = 0; i < n; ++i) {
      const double phi = 2.0 * kPi * i / n;
      const double dist = (point(phi) - x).norm();
      if (dist < best) best = dist, best_phi = phi;
    }
    auto res = newton(x, best_phi);
    if (res.second > best + 1e-12) {
      throw NumericFailure("perturbed-ball projection did not converge", res.second, res.second - best);
    }
    return res;
  }

  Vec c_;
  double r0_, a_;
  int k_;
  double ph_;
  double rin_;
};

class Intersection final : public Domain {
 public:
  explicit Intersection(std::vector<DomainPtr> parts) : parts_(std::move(parts)) {}
  int dim() const override { return parts_.front()->dim(); }
  std::string kind() const override { return "intersection"; }
  bool contains(const Vec& x) const override {
    return std::all_of(parts_.begin(), parts_.end(), [&](const auto& p) { return p->contains(x); });
  }
  double delta(const Vec& x) const override {
    double d = kInf;
    for (const auto& p : parts_) d = std::min(d, p->delta(x));
    return d;
  }
  BoundaryPoint nearest_boundary(const Vec& x) const override {
    const DomainPtr* best = &parts_.front();
    double d = kInf;
    for (const auto& p : parts_) {
      const double dp = p->delta(x);
      if (dp < d) d = dp, best = &p;
    }
    return (*best)->nearest_boundary(x);
  }
  Vec normal_at(const Vec& z) const override {
    const DomainPtr* best = &parts_.front();
    double r = kInf;
    for (const auto& p : parts_) {
      const double rp = p->boundary_residual(z);
      if (rp < r) r = rp, best = &p;
    }
    return (*best)->normal_at(z);
  }
  double boundary_residual(const Vec& z) const override {
    double r = kInf;
    for (const auto& p : parts_) r = std::min(r, p->boundary_residual(z));
    return r;
  }
  double interior_ball_radius() const override {
    double r = kInf;
    for (const auto& p : parts_) r = std::min(r, p->interior_ball_radius());
    return r;
  }
  double exterior_ball_radius() const override { return 0.0; }
  std::vector<Vec> boundary_samples(int n) const override {
    std::vector<Vec> out;
    for (const auto& p : parts_) {
      for (const auto& z : p->boundary_samples(n)) {
        if (std::all_of(parts_.begin(), parts_.end(),
                        [&](const auto& q) { return q == p || q->contains(z); })) {
          out.push_back(z);
        }
      }
    }
    return out;
  }
  json to_json() const override {
    json arr = json::array();
    for (const auto& p : parts_) arr.push_back(p->to_json());
    return json{{"kind", kind()}, {"parts", arr}};
  }

 private:
  std::vector<DomainPtr> parts_;
};

class Framed final : public Domain {
 public:
  Framed(DomainPtr base, BoundaryFrame f) : base_(std::move(base)), f_(std::move(f)) {}
  int dim() const override { return base_->dim(); }
  std::string kind() const override { return "framed"; }
  bool contains(const Vec& y) const override { return base_->contains(f_.to_global(y)); }
  double delta(const Vec& y) const override { return f_.scale * base_->delta(f_.to_global(y)); }
  BoundaryPoint nearest_boundary(const Vec& y) const override {
    const auto bp = base_->nearest_boundary(f_.to_global(y));
    return {f_.to_local(bp.z), f_.rotation * bp.n, f_.scale * bp.delta};
  }
  Vec normal_at(const Vec& z) const override { return f_.rotation * base_->normal_at(f_.to_global(z)); }
  double boundary_residual(const Vec& z) const override {
    return f_.scale * base_->boundary_residual(f_.to_global(z));
  }
  double interior_ball_radius() const override { return f_.scale * base_->interior_ball_radius(); }
  double exterior_ball_radius() const override { return f_.scale * base_->exterior_ball_radius(); }
  std::vector<Vec> boundary_samples(int n) const override {
    std::vector<Vec> out;
    for (const auto& z : base_->boundary_samples(n)) out.push_back(f_.to_local(z));
    return out;
  }
  json to_json() const override { return json{{"kind", kind()}, {"base", base_->to_json()}, {"frame", f_.to_json()}}; }
  std::optional<SimpleShape> simple_shape() const override {
    auto s = base_->simple_shape();
    if (!s) return s;
    s->point = f_.to_local(s->point);
    s->normal = f_.rotation * s->normal;
    s->radius *= f_.scale;
    return s;
  }

 private:
  DomainPtr base_;
  BoundaryFrame f_;
};

}  // namespace

double Domain::collar() const { return 0.99 * std::min(interior_ball_radius(), exterior_ball_radius()); }

DomainPtr make_halfspace(const Vec& point, const Vec& inward_normal) {
  if (point.size() != inward_normal.size() || point.size() < 2 || point.size() > kMaxDim) {
    throw InvalidArgument("half-space: inconsistent dimensions");
  }
  require_unit(inward_normal, 1e-12, "half-space normal");
  return std::make_shared<HalfSpace>(point, inward_normal.normalized());
}

DomainPtr make_ball(const Vec& center, double radius) {
  if (center.size() < 2 || center.size() > kMaxDim) throw InvalidArgument("ball: unsupported dimension");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("ball: radius must be positive");
  return std::make_shared<Ball>(center, radius);
}

DomainPtr make_ellipsoid(const Vec& center, const Vec& semi_axes) {
  if (center.size() != semi_axes.size() || center.size() < 2 || center.size() > kMaxDim) {
    throw InvalidArgument("ellipsoid: inconsistent dimensions");
  }
  if (!(semi_axes.minCoeff() > 0.0)) throw InvalidArgument("ellipsoid: semi-axes must be positive");
  return std::make_shared<Ellipsoid>(center, semi_axes);
}

DomainPtr make_perturbed_ball(const Vec& center, double r0, double amplitude, int k, double phase) {
  if (center.size() != 2) throw InvalidArgument("perturbed ball is defined in d = 2 only");
  if (!(r0 > 0.0)) throw InvalidArgument("perturbed ball: radius must be positive");
  if (k < 1) throw InvalidArgument("perturbed ball: frequency must be at least 1");
  if (std::abs(amplitude) * k * k > 0.1) throw InvalidArgument("perturbed ball: need |a| k^2 <= 0.1");
  return std::make_shared<PerturbedBall>(center, r0, amplitude, k, phase);
}

DomainPtr make_intersection(std::vector<DomainPtr> parts) {
  if (parts.empty()) throw InvalidArgument("intersection of no sets");
  for (const auto& p : parts) {
    if (p->dim() != parts.front()->dim()) throw InvalidArgument("intersection: dimension mismatch");
  }
  return std::make_shared<Intersection>(std::move(parts));
}

json BoundaryFrame::to_json() const {
  json rows = json::array();
  for (int r = 0; r < rotation.rows(); ++r) rows.push_back(vec_to_json(rotation.row(r).transpose()));
  return json{{"origin", vec_to_json(z)}, {"normal", vec_to_json(n)}, {"rotation", rows}, {"scale", scale}};
}

BoundaryFrame boundary_frame(const Domain& dom, const Vec& z) {
  require_dims(z, dom.dim());
  if (dom.boundary_residual(z) > 1e-10) throw InvalidArgument("boundary_frame: point is not on the boundary");
  BoundaryFrame f;
  f.z = z;
  f.n = dom.normal_at(z);
  f.rotation = rotation_to_last_axis(f.n);
  const double r = std::min(dom.interior_ball_radius(), dom.exterior_ball_radius());
  f.scale = std::isfinite(r) ? 2.0 / r : 1.0;
  return f;
}

DomainPtr framed_domain(DomainPtr base, const BoundaryFrame& frame) {
  return std::make_shared<Framed>(std::move(base), frame);
}

DomainPtr domain_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "half-space") return make_halfspace(vec_from_json(j.at("point")), vec_from_json(j.at("normal")));
  if (kind == "ball") return make_ball(vec_from_json(j.at("center")), j.at("radius").get<double>());
  if (kind == "ellipsoid") return make_ellipsoid(vec_from_json(j.at("center")), vec_from_json(j.at("semi_axes")));
  if (kind == "perturbed-ball") {
    return make_perturbed_ball(vec_from_json(j.at("center")), j.at("r0").get<double>(),
                               j.at("amplitude").get<double>(), j.at("k").get<int>(), j.value("phase", 0.0));
  }
  if (kind == "intersection") {
    std::vector<DomainPtr> parts;
    for (const auto& p : j.at("parts")) parts.push_back(domain_from_json(p));
    return make_intersection(std::move(parts));
  }
  if (kind == "framed") {
    const auto& fj = j.at("frame");
    BoundaryFrame f;
    f.z = vec_from_json(fj.at("origin"));
    f.n = vec_from_json(fj.at("normal"));
    const int d = static_cast<int>(f.z.size());
    f.rotation = Mat(d, d);
    for (int r = 0; r < d; ++r) f.rotation.row(r) = vec_from_json(fj.at("rotation")[r]).transpose();
    f.scale = fj.at("scale").get<double>();
    return framed_domain(domain_from_json(j.at("base")), f);
  }
  throw InvalidArgument("unknown domain kind '" + kind + "'");
}

double check_odl2(const Domain& dom, const std::vector<Vec>& grid) {
  double worst = -kInf;
  const int d = dom.dim();
  for (const auto& x : grid) {
    if (!dom.contains(x) && dom.boundary_residual(x) > 1e-12) continue;
    const double xt2 = x.head(d - 1).squaredNorm();
    worst = std::max(worst, std::abs(dom.delta(x) - x[d - 1]) - 0.5 * xt2);
  }
  return worst;
}

}  // namespace sdecay
