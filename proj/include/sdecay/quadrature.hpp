#pragma once

#include <functional>
#include <span>
#include <vector>

namespace sdecay::quad {

/// Result of a one-dimensional integration with an error estimate.
struct Estimate {
  double value = 0.0;
  double error = 0.0;
  double l1 = 0.0;  // integral of |f|, used to scale tolerances
  int panels = 0;
};

using Integrand = std::function<double(double)>;

/// 16-point Gauss-Legendre on [a, b].
double gauss_legendre16(const Integrand& f, double a, double b);

/// Composite 16-point Gauss-Legendre over consecutive breakpoints.
double composite_gauss_legendre(const Integrand& f, std::span<const double> breaks);

/// Kronrod 15 / Gauss 7 pair on [a, b]; error is |K15 - G7|.
Estimate gauss_kronrod15(const Integrand& f, double a, double b);

struct AdaptiveOptions {
  double abs_tol = 1e-10;
  double rel_tol = 0.0;       // stop when error <= abs_tol + rel_tol * l1
  int initial_panels = 1;
  int max_panels = 2000;
};

/// Globally adaptive Gauss-Kronrod: bisects the panel with the largest error until the
/// summed error meets the tolerance. Throws NumericFailure when max_panels is exhausted.
Estimate adaptive_gauss_kronrod(const Integrand& f, double a, double b, const AdaptiveOptions& opt);

/// Adaptive integration starting from the panels between consecutive breakpoints.
Estimate adaptive_gauss_kronrod_panels(const Integrand& f, std::span<const double> breaks, const AdaptiveOptions& opt,
                                       bool* converged);

/// Integrand that also reports a side quantity through `aux` (for instance its own
/// pointwise error). The side quantity is integrated with the Kronrod nodes of the final panels.
using IntegrandWithAux = std::function<double(double x, double* aux)>;

struct EstimateWithAux : Estimate {
  double aux = 0.0;
};

/// As adaptive_gauss_kronrod_panels; refinement is driven by the main value only.
EstimateWithAux adaptive_gauss_kronrod_panels_aux(const IntegrandWithAux& f, std::span<const double> breaks,
                                                  const AdaptiveOptions& opt, bool* converged);

/// Same as adaptive_gauss_kronrod but returns the best estimate instead of throwing.
Estimate adaptive_gauss_kronrod_nothrow(const Integrand& f, double a, double b, const AdaptiveOptions& opt,
                                        bool* converged);

/// Breakpoints on [a, b] geometrically graded toward both endpoints: panel widths halve
/// `levels` times approaching each end, with `middle` uniform panels between.
std::vector<double> graded_breaks_two_sided(double a, double b, int levels, int middle);

/// Breakpoints on [a, b] graded geometrically toward a only.
std::vector<double> graded_breaks_toward_left(double a, double b, int levels, int tail_panels);

}  // namespace sdecay::quad
