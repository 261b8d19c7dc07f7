#pragma once

#include "sdecay/types.hpp"

#include "json.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sdecay {

struct BoundaryPoint {
  Vec z;         // nearest boundary point
  Vec n;         // inward unit normal at z
  double delta;  // |x - z|
};

/// Balls and half-spaces have inner parallel sets of the same kind, which lets callers
/// work out tangencies to the level sets of δ in closed form.
struct SimpleShape {
  enum class Kind { Ball, HalfSpace } kind;
  Vec point;      // centre, or a point on the boundary plane
  Vec normal;     // inward normal (half-space only)
  double radius;  // ball only
};

/// Open C^{1,1} set with exact distance-to-complement. Immutable and thread-safe.
class Domain {
 public:
  virtual ~Domain() = default;

  virtual int dim() const = 0;
  virtual std::string kind() const = 0;
  virtual bool contains(const Vec& x) const = 0;
  /// Distance to the complement; 0 outside.
  virtual double delta(const Vec& x) const = 0;
  /// Nearest boundary point and inward normal. Throws DomainError outside the collar
  /// (or for exterior points), NumericFailure if the projection does not converge.
  virtual BoundaryPoint nearest_boundary(const Vec& x) const = 0;
  /// Inward unit normal at a boundary point.
  virtual Vec normal_at(const Vec& z) const = 0;
  /// How far z is from lying on the boundary (zero on the boundary).
  virtual double boundary_residual(const Vec& z) const = 0;
  virtual double interior_ball_radius() const = 0;
  /// +infinity for convex sets.
  virtual double exterior_ball_radius() const = 0;
  /// Points spread over the boundary (bounded kinds) or over a unit patch (half-space).
  virtual std::vector<Vec> boundary_samples(int n) const = 0;
  virtual nlohmann::json to_json() const = 0;
  virtual std::optional<SimpleShape> simple_shape() const { return std::nullopt; }

  /// Width of the band inside which nearest points are unique.
  double collar() const;
};

using DomainPtr = std::shared_ptr<const Domain>;

DomainPtr make_halfspace(const Vec& point, const Vec& inward_normal);
DomainPtr make_ball(const Vec& center, double radius);
DomainPtr make_ellipsoid(const Vec& center, const Vec& semi_axes);
/// d = 2 only: boundary r = R0 (1 + a cos(k (phi - phase))) around the center, a k^2 <= 0.1.
DomainPtr make_perturbed_ball(const Vec& center, double r0, double amplitude, int k, double phase = 0.0);
/// Intersection of open sets; distance is the minimum over the parts. Not C^{1,1} at the
/// seams, so it only serves as a Monte Carlo cap.
DomainPtr make_intersection(std::vector<DomainPtr> parts);

DomainPtr domain_from_json(const nlohmann::json& j);

/// Isometry plus dilation sending z to the origin and the inward normal at z to e_d,
/// scaled so that the certified ball radii become at least 2.
struct BoundaryFrame {
  Vec z;
  Vec n;
  Mat rotation;  // rotation * n = e_d, det = +1
  double scale = 1.0;

  Vec to_local(const Vec& x) const { return scale * (rotation * (x - z)); }
  Vec to_global(const Vec& y) const { return z + rotation.transpose() * y / scale; }

  nlohmann::json to_json() const;
};

BoundaryFrame boundary_frame(const Domain& dom, const Vec& z);

/// The domain seen through a frame (points given in local coordinates).
DomainPtr framed_domain(DomainPtr base, const BoundaryFrame& frame);

/// max over the grid of |δ(x) - x_d| - |x~|^2 / 2 (x~ the first d-1 coordinates), for a
/// normalized domain. Grid points outside the closed domain are ignored.
double check_odl2(const Domain& normalized, const std::vector<Vec>& grid);

}  // namespace sdecay
