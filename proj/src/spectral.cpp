#include "sdecay/spectral.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace sdecay {

using nlohmann::json;

std::string to_string(DensityKind kind) {
  switch (kind) {
    case DensityKind::Constant: return "constant";
    case DensityKind::CosineTilt: return "cosine-tilt";
    case DensityKind::BumpPlusFloor: return "bump-plus-floor";
    case DensityKind::Tabulated: return "tabulated";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Geodesic grid

GeodesicGrid::GeodesicGrid(int level) : level_(level) {
  if (level < 0 || level > 8) throw InvalidArgument("geodesic grid level must be in [0, 8]");
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  const double raw[12][3] = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                             {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  for (const auto& r : raw) vertices_.push_back(Eigen::Vector3d(r[0], r[1], r[2]).normalized());
  const int tri[20][3] = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                          {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                          {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (const auto& t : tri) {
    Face f{{t[0], t[1], t[2]}};
    const auto& a = vertices_[t[0]];
    const auto& b = vertices_[t[1]];
    const auto& c = vertices_[t[2]];
    if (a.cross(b).dot(c) < 0) std::swap(f.v[1], f.v[2]);
    faces_.push_back(f);
  }

  std::map<std::pair<int, int>, int> midpoints;
  auto midpoint = [&](int i, int j) {
    const auto key = std::minmax(i, j);
    auto it = midpoints.find(key);
    if (it != midpoints.end()) return it->second;
    vertices_.push_back((vertices_[i] + vertices_[j]).normalized());
    const int idx = static_cast<int>(vertices_.size()) - 1;
    midpoints.emplace(key, idx);
    return idx;
  };

  std::size_t begin = 0;
  for (int l = 0; l < level; ++l) {
    const std::size_t end = faces_.size();
    for (std::size_t k = begin; k < end; ++k) {
      const int a = faces_[k].v[0], b = faces_[k].v[1], c = faces_[k].v[2];
      const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      faces_[k].child = static_cast<int>(faces_.size());
      faces_.push_back(Face{{a, ab, ca}});
      faces_.push_back(Face{{ab, b, bc}});
      faces_.push_back(Face{{ca, bc, c}});
      faces_.push_back(Face{{ab, bc, ca}});
    }
    begin = end;
  }
}

double GeodesicGrid::interpolate(const std::vector<double>& values, const Eigen::Vector3d& w) const {
  auto score = [&](const Face& f) {
    const auto& a = vertices_[f.v[0]];
    const auto& b = vertices_[f.v[1]];
    const auto& c = vertices_[f.v[2]];
    return std::min({a.cross(b).dot(w), b.cross(c).dot(w), c.cross(a).dot(w)});
  };
  int best = 0;
  double best_score = -1e300;
  for (int k = 0; k < n_roots_; ++k) {
    const double s = score(faces_[k]);
    if (s > best_score) best_score = s, best = k;
    if (s >= 0) break;
  }
  while (faces_[best].child >= 0) {
    const int first = faces_[best].child;
    int pick = first;
    double pick_score = -1e300;
    for (int k = first; k < first + 4; ++k) {
      const double s = score(faces_[k]);
      if (s > pick_score) pick_score = s, pick = k;
      if (s >= 0) break;
    }
    best = pick;
  }
  const Face& f = faces_[best];
  Eigen::Matrix3d m;
  m.col(0) = vertices_[f.v[0]];
  m.col(1) = vertices_[f.v[1]];
  m.col(2) = vertices_[f.v[2]];
  Eigen::Vector3d lam = m.partialPivLu().solve(w);
  lam = lam.cwiseMax(0.0);
  lam /= lam.sum();
  return lam[0] * values[f.v[0]] + lam[1] * values[f.v[1]] + lam[2] * values[f.v[2]];
}

// ---------------------------------------------------------------------------
// SphericalDensity

namespace {

void require_dim(int dim) {
  if (dim < 2 || dim > kMaxDim) {
    throw InvalidArgument("dimension must be between 2 and " + std::to_string(kMaxDim));
  }
}

Vec to_vec(const json& j) {
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

json from_vec(const Vec& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

constexpr double kTwoPi = 2.0 * kPi;

}  // namespace

SphericalDensity SphericalDensity::constant(int dim, double c0) {
  require_dim(dim);
  if (!(c0 > 0.0) || !std::isfinite(c0)) throw InvalidArgument("constant density must be positive and finite");
  SphericalDensity d;
  d.dim_ = dim;
  d.kind_ = DensityKind::Constant;
  d.c0_ = c0;
  d.axis_ = Vec::Zero(dim);
  return d;
}

SphericalDensity SphericalDensity::cosine_tilt(int dim, double c0, double c1, const Vec& v) {
  require_dim(dim);
  if (v.size() != dim) throw InvalidArgument("tilt vector has wrong dimension");
  require_unit(v, 1e-12, "tilt vector");
  if (!(c0 > std::abs(c1))) throw InvalidArgument("cosine-tilt requires c0 > |c1|");
  SphericalDensity d;
  d.dim_ = dim;
  d.kind_ = DensityKind::CosineTilt;
  d.c0_ = c0;
  d.c1_ = c1;
  d.axis_ = v;
  return d;
}

SphericalDensity SphericalDensity::bump_plus_floor(int dim, double floor, double height, const Vec& center,
                                                   double kappa, bool symmetric) {
  require_dim(dim);
  if (center.size() != dim) throw InvalidArgument("bump centre has wrong dimension");
  require_unit(center, 1e-12, "bump centre");
  if (!(floor > 0.0)) throw InvalidArgument("bump-plus-floor requires a positive floor");
  if (!(height >= 0.0)) throw InvalidArgument("bump height must be nonnegative");
  if (!(kappa > 0.0)) throw InvalidArgument("bump concentration must be positive");
  SphericalDensity d;
  d.dim_ = dim;
  d.kind_ = DensityKind::BumpPlusFloor;
  d.c0_ = floor;
  d.c1_ = height;
  d.kappa_ = kappa;
  d.symmetric_ = symmetric;
  d.axis_ = center;
  return d;
}

SphericalDensity SphericalDensity::tabulated_circle(std::vector<double> angles, std::vector<double> values) {
  if (angles.size() != values.size()) throw InvalidArgument("table angles and values differ in length");
  SphericalDensity d;
  d.dim_ = 2;
  d.kind_ = DensityKind::Tabulated;
  d.axis_ = Vec::Zero(2);
  if (!angles.empty()) {
    std::vector<std::size_t> order(angles.size());
    std::iota(order.begin(), order.end(), 0);
    for (auto& a : angles) {
      a = std::fmod(a, kTwoPi);
      if (a < 0) a += kTwoPi;
    }
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return angles[i] < angles[j]; });
    for (auto i : order) {
      if (!(values[i] > 0.0) || !std::isfinite(values[i])) throw InvalidArgument("table values must be positive");
      d.angles_.push_back(angles[i]);
      d.values_.push_back(values[i]);
    }
    for (std::size_t i = 1; i < d.angles_.size(); ++i) {
      if (!(d.angles_[i] > d.angles_[i - 1])) throw InvalidArgument("duplicate table angle");
    }
    d.table_min_ = *std::min_element(d.values_.begin(), d.values_.end());
  }
  return d;
}

SphericalDensity SphericalDensity::tabulated_sphere(int level, std::vector<double> values) {
  auto grid = std::make_shared<const GeodesicGrid>(level);
  if (!values.empty() && values.size() != grid->vertices().size()) {
    throw InvalidArgument("table needs one value per geodesic-grid vertex (" +
                          std::to_string(grid->vertices().size()) + ")");
  }
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("table values must be positive");
  }
  SphericalDensity d;
  d.dim_ = 3;
  d.kind_ = DensityKind::Tabulated;
  d.axis_ = Vec::Zero(3);
  d.grid_ = std::move(grid);
  d.values_ = std::move(values);
  if (!d.values_.empty()) d.table_min_ = *std::min_element(d.values_.begin(), d.values_.end());
  return d;
}

SphericalDensity SphericalDensity::tabulate(const SphericalDensity& source, int resolution) {
  if (source.dim() == 2) {
    std::vector<double> angles, values;
    for (int i = 0; i < resolution; ++i) {
      const double a = kTwoPi * i / resolution;
      Vec w(2);
      w << std::cos(a), std::sin(a);
      angles.push_back(a);
      values.push_back(source.eval_unchecked(w));
    }
    return tabulated_circle(std::move(angles), std::move(values));
  }
  if (source.dim() == 3) {
    GeodesicGrid grid(resolution);
    std::vector<double> values;
    for (const auto& v : grid.vertices()) values.push_back(source.eval_unchecked(Vec(v)));
    return tabulated_sphere(resolution, std::move(values));
  }
  throw InvalidArgument("tabulated densities exist only for d = 2 and d = 3");
}

double SphericalDensity::operator()(const Vec& w) const {
  if (w.size() != dim_) throw InvalidArgument("direction has wrong dimension");
  require_unit(w, 1e-12, "density argument");
  return eval_unchecked(w);
}

double SphericalDensity::eval_unchecked(const Vec& w) const {
  switch (kind_) {
    case DensityKind::Constant:
      return c0_;
    case DensityKind::CosineTilt:
      return c0_ + c1_ * w.dot(axis_);
    case DensityKind::BumpPlusFloor: {
      const double c = w.dot(axis_);
      double v = c0_ + c1_ * std::exp(kappa_ * (c - 1.0));
      if (symmetric_) v += c1_ * std::exp(kappa_ * (-c - 1.0));
      return v;
    }
    case DensityKind::Tabulated:
      return eval_table(w);
  }
  return 0.0;
}

double SphericalDensity::eval_table(const Vec& w_in) const {
  if (values_.empty()) throw InvalidState("tabulated density has an empty table");
  Vec w = frame_ ? Vec(*frame_ * w_in) : w_in;
  double v;
  if (dim_ == 2) {
    double a = std::atan2(w[1], w[0]);
    if (a < 0) a += kTwoPi;
    const std::size_t n = angles_.size();
    if (n == 1) return values_[0];
    auto it = std::upper_bound(angles_.begin(), angles_.end(), a);
    std::size_t hi = static_cast<std::size_t>(it - angles_.begin());
    std::size_t lo;
    double a_lo, a_hi;
    if (hi == 0 || hi == n) {
      lo = n - 1;
      hi = 0;
      a_lo = angles_[lo];
      a_hi = angles_[0] + kTwoPi;
      if (a < a_lo) a += kTwoPi;
    } else {
      lo = hi - 1;
      a_lo = angles_[lo];
      a_hi = angles_[hi];
    }
    const double s = (a - a_lo) / (a_hi - a_lo);
    v = (1.0 - s) * values_[lo] + s * values_[hi];
  } else {
    v = grid_->interpolate(values_, Eigen::Vector3d(w[0], w[1], w[2]));
  }
  return std::max(v, table_min_);
}

SphericalDensity SphericalDensity::rotated(const Mat& rotation) const {
  if (rotation.rows() != dim_ || rotation.cols() != dim_) throw InvalidArgument("rotation has wrong shape");
  SphericalDensity d = *this;
  switch (kind_) {
    case DensityKind::Constant:
      break;
    case DensityKind::CosineTilt:
    case DensityKind::BumpPlusFloor:
      d.axis_ = rotation * axis_;
      d.axis_.normalize();
      break;
    case DensityKind::Tabulated: {
      const Mat back = rotation.transpose();
      d.frame_ = frame_ ? Mat(*frame_ * back) : back;
      break;
    }
  }
  return d;
}

std::vector<double> SphericalDensity::kink_angles() const {
  std::vector<double> out;
  if (kind_ != DensityKind::Tabulated || dim_ != 2) return out;
  for (double a : angles_) {
    Vec w(2);
    w << std::cos(a), std::sin(a);
    if (frame_) w = frame_->transpose() * w;
    double b = std::atan2(w[1], w[0]);
    if (b < 0) b += kTwoPi;
    out.push_back(b);
  }
  std::sort(out.begin(), out.end());
  return out;
}

json SphericalDensity::to_json() const {
  json j;
  j["kind"] = to_string(kind_);
  switch (kind_) {
    case DensityKind::Constant:
      j["c0"] = c0_;
      break;
    case DensityKind::CosineTilt:
      j["c0"] = c0_;
      j["c1"] = c1_;
      j["v"] = from_vec(axis_);
      break;
    case DensityKind::BumpPlusFloor:
      j["floor"] = c0_;
      j["height"] = c1_;
      j["center"] = from_vec(axis_);
      j["kappa"] = kappa_;
      j["symmetric"] = symmetric_;
      break;
    case DensityKind::Tabulated:
      if (dim_ == 2) {
        j["angles"] = angles_;
      } else {
        j["level"] = grid_->level();
      }
      j["values"] = values_;
      if (frame_) {
        json rows = json::array();
        for (int r = 0; r < frame_->rows(); ++r) rows.push_back(from_vec(frame_->row(r).transpose()));
        j["frame"] = rows;
      }
      break;
  }
  return j;
}

SphericalDensity SphericalDensity::from_json(const json& j, int dim) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") return constant(dim, j.value("c0", 1.0));
  if (kind == "cosine-tilt") {
    const Vec v = to_vec(j.at("v"));
    return cosine_tilt(dim, j.at("c0").get<double>(), j.at("c1").get<double>(), v);
  }
  if (kind == "bump-plus-floor") {
    return bump_plus_floor(dim, j.at("floor").get<double>(), j.at("height").get<double>(), to_vec(j.at("center")),
                           j.at("kappa").get<double>(), j.value("symmetric", false));
  }
  if (kind == "tabulated") {
    SphericalDensity d;
    if (dim == 2) {
      d = tabulated_circle(j.at("angles").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
    } else if (dim == 3) {
      d = tabulated_sphere(j.at("level").get<int>(), j.at("values").get<std::vector<double>>());
    } else {
      throw InvalidArgument("tabulated densities exist only for d = 2 and d = 3");
    }
    if (j.contains("frame")) {
      Mat f(dim, dim);
      for (int r = 0; r < dim; ++r) f.row(r) = to_vec(j["frame"][r]).transpose();
      d.frame_ = f;
    }
    return d;
  }
  throw InvalidArgument("unknown density kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// StableSpec

Vec StableSpec::drift() const { return gamma ? *gamma : Vec::Zero(dim()); }

StableSpec StableSpec::rotated(const Mat& rotation) const {
  StableSpec s;
  s.alpha = alpha;
  s.theta = theta.rotated(rotation);
  if (gamma) s.gamma = Vec(rotation * *gamma);
  return s;
}

StableSpec StableSpec::dual() const { return rotated(-Mat::Identity(dim(), dim())); }

json StableSpec::to_json() const {
  json j;
  j["alpha"] = alpha;
  j["dim"] = dim();
  j["theta"] = theta.to_json();
  if (gamma) j["gamma"] = from_vec(*gamma);
  return j;
}

StableSpec StableSpec::from_json(const json& j) {
  StableSpec s;
  s.alpha = j.at("alpha").get<double>();
  const int dim = j.at("dim").get<int>();
  s.theta = SphericalDensity::from_json(j.at("theta"), dim);
  if (j.contains("gamma") && !j["gamma"].is_null()) s.gamma = to_vec(j["gamma"]);
  return s;
}

double levy_density(const StableSpec& spec, const Vec& x) {
  if (x.size() != spec.dim()) throw InvalidArgument("point has wrong dimension");
  const double r = x.norm();
  if (!(r > 0.0)) throw InvalidArgument("the Levy density is singular at the origin");
  return std::pow(r, -spec.dim() - spec.alpha) * spec.theta.eval_unchecked(x / r);
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::ok() const {
  return std::all_of(items.begin(), items.end(), [](const auto& i) { return i.passed; });
}

json ValidationReport::to_json() const {
  json j;
  j["ok"] = ok();
  json arr = json::array();
  for (const auto& i : items) {
    json e{{"name", i.name}, {"passed", i.passed}, {"detail", i.detail}};
    if (i.witness) e["witness"] = from_vec(*i.witness);
    arr.push_back(e);
  }
  j["checks"] = arr;
  return j;
}

ValidationReport validate_spec(const StableSpec& spec) {
  ValidationReport rep;
  auto add = [&](std::string name, bool ok, std::string detail, std::optional<Vec> witness = std::nullopt) {
    rep.items.push_back({std::move(name), ok, std::move(detail), std::move(witness)});
  };
  const double a = spec.alpha;
  const int d = spec.dim();

  add("alpha-range", a > 0.0 && a < 2.0, "alpha = " + std::to_string(a));
  add("dimension", d >= 2 && d <= kMaxDim, "dim = " + std::to_string(d));
  const bool near_one = a != 1.0 && std::abs(a - 1.0) < 1e-8;
  add("alpha-not-near-one", !near_one,
      near_one ? "alpha within 1e-8 of 1 but not equal; use alpha = 1 exactly" : "ok");

  if (spec.gamma) {
    if (a != 1.0) {
      add("drift", false, "drift is admitted only when alpha = 1");
    } else if (spec.gamma->size() != d) {
      add("drift", false, "drift vector has wrong dimension");
    } else {
      add("drift", true, "ok");
    }
  } else {
    add("drift", true, "absent");
  }

  if (d < 2 || d > kMaxDim) return rep;
  const auto grid = direction_grid(d, kValidationDirections);
  double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
  Vec argmin = grid.front(), argmax = grid.front();
  double sym = 0.0;
  Vec argsym = grid.front();
  bool all_finite = true;
  try {
    for (const auto& w : grid) {
      const double v = spec.theta.eval_unchecked(w);
      if (!std::isfinite(v)) {
        all_finite = false;
        argmax = w;
        continue;
      }
      if (v < vmin) vmin = v, argmin = w;
      if (v > vmax) vmax = v, argmax = w;
      const double s = std::abs(v - spec.theta.eval_unchecked(-w));
      if (s > sym) sym = s, argsym = w;
    }
  } catch (const std::exception& e) {
    add("evaluable", false, e.what());
    return rep;
  }
  std::ostringstream lo, hi;
  lo.precision(17);
  hi.precision(17);
  lo << "min over " << grid.size() << " directions = " << vmin;
  hi << "max over " << grid.size() << " directions = " << vmax;
  add("positive", vmin > 0.0, lo.str(), vmin > 0.0 ? std::nullopt : std::optional<Vec>(argmin));
  add("finite", all_finite, hi.str(), all_finite ? std::nullopt : std::optional<Vec>(argmax));

  if (a == 1.0) {
    const double tol = spec.theta.is_tabulated() ? kSymTolTabulated : kSymTolClosedForm;
    std::ostringstream msg;
    msg.precision(17);
    msg << "max |theta(w) - theta(-w)| = " << sym << " (tol " << tol << ")";
    const bool ok = sym <= tol;
    add("symmetric", ok, ok ? msg.str() : "symmetry violated: " + msg.str(),
        ok ? std::nullopt : std::optional<Vec>(argsym));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Direction grids

int nth_prime(int k) {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  if (k < 0 || k >= 16) throw InvalidArgument("prime index out of range");
  return primes[k];
}

double radical_inverse(std::uint64_t index, int base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

double sphere_area(int dim) {
  return 2.0 * std::pow(kPi, 0.5 * dim) / boost::math::tgamma(0.5 * dim);
}

std::vector<Vec> direction_grid(int dim, int n) {
  require_dim(dim);
  if (n < 1) throw InvalidArgument("direction count must be positive");
  std::vector<Vec> out;
  out.reserve(n);
  if (dim == 2) {
    for (int i = 0; i < n; ++i) {
      const double a = kTwoPi * i / n;
      Vec w(2);
      w << std::cos(a), std::sin(a);
      out.push_back(w);
    }
  } else if (dim == 3) {
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / n;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      Vec w(3);
      w << rho * std::cos(golden * i), rho * std::sin(golden * i), z;
      out.push_back(w);
    }
  } else {
    const boost::math::normal_distribution<double> normal;
    for (int i = 1; out.size() < static_cast<std::size_t>(n); ++i) {
      Vec g(dim);
      for (int k = 0; k < dim; ++k) g[k] = boost::math::quantile(normal, radical_inverse(i, nth_prime(k)));
      const double norm = g.norm();
      if (norm > 1e-12) out.push_back(g / norm);
    }
  }
  return out;
}

std::vector<Vec> antipodal_direction_grid(int dim, int n) {
  require_dim(dim);
  if (n < 2 || n % 2 != 0) throw InvalidArgument("antipodal grids need an even direction count");
  std::vector<Vec> half;
  const int m = n / 2;
  if (dim == 2) {
    for (int i = 0; i < m; ++i) {
      const double a = kTwoPi * (i + 0.5) / n;
      Vec w(2);
      w << std::cos(a), std::sin(a);
      half.push_back(w);
    }
  } else if (dim == 3) {
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < m; ++i) {
      const double z = 1.0 - (i + 0.5) / m;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      Vec w(3);
      w << rho * std::cos(golden * i), rho * std::sin(golden * i), z;
      half.push_back(w);
    }
  } else {
    for (const auto& w : direction_grid(dim, m)) half.push_back(w[dim - 1] >= 0 ? w : Vec(-w));
  }
  std::vector<Vec> out = half;
  for (const auto& w : half) out.push_back(-w);
  return out;
}

}  // namespace sdecay
