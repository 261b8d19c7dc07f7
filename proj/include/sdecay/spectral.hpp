#pragma once

#include "sdecay/types.hpp"

#include "json.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sdecay {

enum class DensityKind { Constant, CosineTilt, BumpPlusFloor, Tabulated };

std::string to_string(DensityKind kind);

/// Geodesic triangulation of S^2 obtained by repeatedly splitting the faces of an
/// icosahedron. Used as the support of tabulated densities in three dimensions.
class GeodesicGrid {
 public:
  explicit GeodesicGrid(int level);

  int level() const noexcept { return level_; }
  const std::vector<Eigen::Vector3d>& vertices() const noexcept { return vertices_; }

  /// Piecewise-linear interpolation of per-vertex values at unit direction w.
  double interpolate(const std::vector<double>& values, const Eigen::Vector3d& w) const;

 private:
  struct Face {
    int v[3];
    int child = -1;  // index of first of four children in faces_, -1 for a leaf
  };
  int level_;
  std::vector<Eigen::Vector3d> vertices_;
  std::vector<Face> faces_;
  int n_roots_ = 20;
};

/// Density ϑ of the spectral measure on the unit sphere. Immutable once built.
class SphericalDensity {
 public:
  static SphericalDensity constant(int dim, double c0);
  /// ϑ(w) = c0 + c1 <w, v>, requires c0 > |c1| and |v| = 1.
  static SphericalDensity cosine_tilt(int dim, double c0, double c1, const Vec& v);
  /// ϑ(w) = floor + height * exp(kappa (<w, m> - 1)), plus the mirrored bump at -m when symmetric.
  static SphericalDensity bump_plus_floor(int dim, double floor, double height, const Vec& center, double kappa,
                                          bool symmetric);
  /// Two-dimensional table over angles in [0, 2pi), linear in angle with periodic wrap.
  static SphericalDensity tabulated_circle(std::vector<double> angles, std::vector<double> values);
  /// Three-dimensional table on the vertices of a geodesic grid of the given level.
  static SphericalDensity tabulated_sphere(int level, std::vector<double> values);
  /// Samples `source` on a table of the same dimension (circle: n angles; sphere: grid level).
  static SphericalDensity tabulate(const SphericalDensity& source, int resolution);

  int dim() const noexcept { return dim_; }
  DensityKind kind() const noexcept { return kind_; }

  /// ϑ(w). Throws InvalidArgument unless |w| = 1 within 1e-12.
  double operator()(const Vec& w) const;
  /// Same as operator() without the unit-norm check.
  double eval_unchecked(const Vec& w) const;

  /// Density w -> ϑ(R^T w), i.e. the law after the rotation R is applied to the process.
  SphericalDensity rotated(const Mat& rotation) const;

  /// Angles (d = 2) at which a tabulated density has kinks, in the rotated frame. Empty otherwise.
  std::vector<double> kink_angles() const;

  bool is_tabulated() const noexcept { return kind_ == DensityKind::Tabulated; }

  nlohmann::json to_json() const;
  static SphericalDensity from_json(const nlohmann::json& j, int dim);

  // Parameter access, mostly for serialization and tests.
  double c0() const noexcept { return c0_; }
  double c1() const noexcept { return c1_; }
  const Vec& axis() const noexcept { return axis_; }
  double kappa() const noexcept { return kappa_; }
  bool symmetric_bump() const noexcept { return symmetric_; }

 private:
  SphericalDensity() = default;
  double eval_table(const Vec& w) const;

  int dim_ = 0;
  DensityKind kind_ = DensityKind::Constant;
  double c0_ = 1.0;   // constant value, tilt offset or bump floor
  double c1_ = 0.0;   // tilt slope or bump height
  double kappa_ = 0.0;
  bool symmetric_ = false;
  Vec axis_;          // tilt vector or bump centre

  // tabulated
  std::vector<double> angles_;
  std::vector<double> values_;
  double table_min_ = 0.0;
  std::shared_ptr<const GeodesicGrid> grid_;
  std::optional<Mat> frame_;  // applied to w before the table lookup
};

/// Full process description.
struct StableSpec {
  double alpha = 1.5;
  SphericalDensity theta = SphericalDensity::constant(2, 1.0);
  std::optional<Vec> gamma;

  int dim() const noexcept { return theta.dim(); }
  /// Drift vector (zero when absent).
  Vec drift() const;
  /// The same process observed after the rotation R (jump directions and drift rotated).
  StableSpec rotated(const Mat& rotation) const;
  /// The dual process -X: ϑ(-w) and drift -γ.
  StableSpec dual() const;

  nlohmann::json to_json() const;
  static StableSpec from_json(const nlohmann::json& j);
};

/// |x|^{-d-alpha} ϑ(x/|x|).
double levy_density(const StableSpec& spec, const Vec& x);

struct ValidationItem {
  std::string name;
  bool passed = true;
  std::string detail;
  std::optional<Vec> witness;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  bool ok() const;
  nlohmann::json to_json() const;
};

inline constexpr double kSymTolClosedForm = 1e-10;
inline constexpr double kSymTolTabulated = 1e-6;
inline constexpr int kValidationDirections = 10000;

ValidationReport validate_spec(const StableSpec& spec);

/// Deterministic quasi-uniform unit vectors: uniform angles (d = 2), Fibonacci sphere
/// (d = 3), normalized Halton points pushed through the normal quantile (d >= 4).
std::vector<Vec> direction_grid(int dim, int n);

/// Symmetric (antipodally closed) grid used for ray discretizations: d = 2 angles
/// (i + 1/2) 2pi/n with n even; d = 3 Fibonacci points on a hemisphere and their mirrors.
std::vector<Vec> antipodal_direction_grid(int dim, int n);

/// Area of the unit sphere S^{d-1}.
double sphere_area(int dim);

/// Halton radical inverse in the given prime base.
double radical_inverse(std::uint64_t index, int base);
int nth_prime(int k);

}  // namespace sdecay
