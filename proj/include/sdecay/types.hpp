#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace sdecay {

/// Largest ambient dimension supported anywhere in the library.
inline constexpr int kMaxDim = 8;

/// Small dynamically sized vector with inline storage (no heap traffic in hot loops).
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

inline constexpr double kPi = 3.14159265358979323846;

// Error taxonomy shared by every module. The CLI maps these onto exit codes.

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Outside the region where a geometric map is well defined (e.g. nearest point not unique).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure failed to reach its tolerance; carries the best value found.
class NumericFailure : public std::runtime_error {
 public:
  NumericFailure(const std::string& what, double best_value, double achieved_error)
      : std::runtime_error(what), best_value_(best_value), achieved_error_(achieved_error) {}
  double best_value() const noexcept { return best_value_; }
  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double best_value_;
  double achieved_error_;
};

class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(const std::string& what, Vec last_position, double elapsed_time, long steps)
      : std::runtime_error(what), last_position_(std::move(last_position)), elapsed_time_(elapsed_time), steps_(steps) {}
  const Vec& last_position() const noexcept { return last_position_; }
  double elapsed_time() const noexcept { return elapsed_time_; }
  long steps() const noexcept { return steps_; }

 private:
  Vec last_position_;
  double elapsed_time_;
  long steps_;
};

/// An experiment ran but its data cannot support a conclusion.
class Inconclusive : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Vec unit_vector(int dim, int axis) {
  Vec e = Vec::Zero(dim);
  e[axis] = 1.0;
  return e;
}

inline void require_unit(const Vec& w, double tol, const char* what) {
  if (std::abs(w.norm() - 1.0) > tol) {
    throw InvalidArgument(std::string(what) + ": expected a unit vector");
  }
}

}  // namespace sdecay

namespace sdecay {

/// Proper rotation Q (det +1) with Q u = e_{d-1} (the last basis vector).
inline Mat rotation_to_last_axis(const Vec& u_in) {
  const int d = static_cast<int>(u_in.size());
  const Vec u = u_in.normalized();
  Vec e = unit_vector(d, d - 1);
  Vec v = u - e;
  Mat h = Mat::Identity(d, d);
  const double vv = v.squaredNorm();
  if (vv < 1e-30) return h;
  h -= 2.0 * v * v.transpose() / vv;
  // h is a reflection; flipping the first coordinate restores orientation and keeps e_{d-1}.
  h.row(0) *= -1.0;
  return h;
}

}  // namespace sdecay
