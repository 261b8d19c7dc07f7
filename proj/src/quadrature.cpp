#include "sdecay/quadrature.hpp"

#include "sdecay/types.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <vector>

namespace sdecay::quad {

namespace {

using GL16 = boost::math::quadrature::gauss<double, 16>;
using GK15 = boost::math::quadrature::gauss_kronrod<double, 15>;
using G7 = boost::math::quadrature::gauss<double, 7>;

}  // namespace

double gauss_legendre16(const Integrand& f, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const auto& x = GL16::abscissa();
  const auto& w = GL16::weights();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += w[i] * (f(mid - half * x[i]) + f(mid + half * x[i]));
  }
  return sum * half;
}

double composite_gauss_legendre(const Integrand& f, std::span<const double> breaks) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] > breaks[i]) sum += gauss_legendre16(f, breaks[i], breaks[i + 1]);
  }
  return sum;
}

namespace {

struct RuleOut {
  Estimate est;
  double aux = 0.0;
};

RuleOut kronrod_with_aux(const IntegrandWithAux& f, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const auto& x = GK15::abscissa();
  const auto& wk = GK15::weights();
  const auto& wg = G7::weights();

  double aux0 = 0.0, auxl = 0.0, auxr = 0.0;
  const double f0 = f(mid, &aux0);
  double kron = wk[0] * f0;
  double gauss = wg[0] * f0;
  double l1 = wk[0] * std::abs(f0);
  double aux = wk[0] * aux0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double fl = f(mid - half * x[i], &auxl);
    const double fr = f(mid + half * x[i], &auxr);
    kron += wk[i] * (fl + fr);
    l1 += wk[i] * (std::abs(fl) + std::abs(fr));
    aux += wk[i] * (auxl + auxr);
    if (i % 2 == 0) gauss += wg[i / 2] * (fl + fr);
  }
  RuleOut out;
  out.est.value = kron * half;
  out.est.error = std::abs((kron - gauss) * half);
  out.est.l1 = l1 * std::abs(half);
  out.est.panels = 1;
  out.aux = aux * half;
  return out;
}

IntegrandWithAux without_aux(const Integrand& f) {
  return [&f](double x, double* aux) {
    *aux = 0.0;
    return f(x);
  };
}

struct Panel {
  double a, b;
  RuleOut r;
  bool operator<(const Panel& other) const { return r.est.error < other.r.est.error; }
};

}  // namespace

Estimate gauss_kronrod15(const Integrand& f, double a, double b) { return kronrod_with_aux(without_aux(f), a, b).est; }

EstimateWithAux adaptive_gauss_kronrod_panels_aux(const IntegrandWithAux& f, std::span<const double> breaks,
                                                  const AdaptiveOptions& opt, bool* converged) {
  std::priority_queue<Panel> heap;
  double error = 0.0, l1 = 0.0;
  int panels = 0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (!(breaks[i + 1] > breaks[i])) continue;
    Panel p{breaks[i], breaks[i + 1], kronrod_with_aux(f, breaks[i], breaks[i + 1])};
    error += p.r.est.error;
    l1 += p.r.est.l1;
    heap.push(p);
    ++panels;
  }
  const int budget = std::max(opt.max_panels, panels);
  auto done = [&] { return error <= opt.abs_tol + opt.rel_tol * l1; };
  while (!heap.empty() && !done() && panels < budget) {
    Panel worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;
    heap.pop();
    Panel left{worst.a, mid, kronrod_with_aux(f, worst.a, mid)};
    Panel right{mid, worst.b, kronrod_with_aux(f, mid, worst.b)};
    error += left.r.est.error + right.r.est.error - worst.r.est.error;
    l1 += left.r.est.l1 + right.r.est.l1 - worst.r.est.l1;
    heap.push(left);
    heap.push(right);
    ++panels;
  }
  // Re-sum to shed accumulated rounding from the incremental updates.
  EstimateWithAux out;
  while (!heap.empty()) {
    const auto& r = heap.top().r;
    out.value += r.est.value;
    out.error += r.est.error;
    out.l1 += r.est.l1;
    out.aux += r.aux;
    heap.pop();
  }
  out.panels = panels;
  if (converged) *converged = out.error <= opt.abs_tol + opt.rel_tol * out.l1;
  return out;
}

Estimate adaptive_gauss_kronrod_panels(const Integrand& f, std::span<const double> breaks, const AdaptiveOptions& opt,
                                       bool* converged) {
  return adaptive_gauss_kronrod_panels_aux(without_aux(f), breaks, opt, converged);
}

Estimate adaptive_gauss_kronrod_nothrow(const Integrand& f, double a, double b, const AdaptiveOptions& opt,
                                        bool* converged) {
  const int n0 = std::max(1, opt.initial_panels);
  std::vector<double> breaks;
  for (int i = 0; i <= n0; ++i) breaks.push_back(i == n0 ? b : a + (b - a) * i / n0);
  return adaptive_gauss_kronrod_panels(f, breaks, opt, converged);
}

Estimate adaptive_gauss_kronrod(const Integrand& f, double a, double b, const AdaptiveOptions& opt) {
  bool ok = false;
  Estimate e = adaptive_gauss_kronrod_nothrow(f, a, b, opt, &ok);
  if (!ok) {
    std::ostringstream msg;
    msg << "adaptive Gauss-Kronrod did not converge: error " << e.error << " after " << e.panels << " panels";
    throw NumericFailure(msg.str(), e.value, e.error);
  }
  return e;
}

std::vector<double> graded_breaks_two_sided(double a, double b, int levels, int middle) {
  const double quarter = 0.25 * (b - a);
  std::vector<double> left;
  left.push_back(a);
  for (int k = levels; k >= 1; --k) left.push_back(a + quarter * std::ldexp(1.0, -k));
  std::vector<double> out = left;
  const double m0 = a + quarter, m1 = b - quarter;
  for (int i = 0; i <= middle; ++i) out.push_back(m0 + (m1 - m0) * i / middle);
  for (int k = 1; k <= levels; ++k) out.push_back(b - quarter * std::ldexp(1.0, -k));
  out.push_back(b);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<double> graded_breaks_toward_left(double a, double b, int levels, int tail_panels) {
  const double half = 0.5 * (b - a);
  std::vector<double> out;
  out.push_back(a);
  for (int k = levels; k >= 1; --k) out.push_back(a + half * std::ldexp(1.0, -k));
  for (int i = 0; i <= tail_panels; ++i) out.push_back(a + half + half * i / tail_panels);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace sdecay::quad
