#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "rieszstop/error.hpp"

// Thin wrappers over Boost.Math integrators and bracketing solvers, so the
// numerical modules share one set of defaults and error conventions.
namespace rieszstop::quad {

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss-Kronrod (15 point) on [a, b]; `a` or `b` may be infinite.
template <class F>
Estimate adaptive(F&& f, double a, double b, double rel_tol = 1e-10, unsigned max_depth = 18) {
  Estimate e;
  double l1 = 0.0;
  e.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, rel_tol,
                                                                           &e.error, &l1);
  return e;
}

/// Double-exponential rule for integrands with endpoint singularities on a
/// finite interval. The integrand is never evaluated at the endpoints.
template <class F>
Estimate tanh_sinh(F&& f, double a, double b, double rel_tol = 1e-10) {
  static thread_local boost::math::quadrature::tanh_sinh<double> rule(12);
  Estimate e;
  if (!(b - a > 1e-12 * std::max(std::abs(a), std::abs(b)))) {
    // too short to place abscissae strictly inside; one midpoint suffices
    e.value = (b - a) * f(0.5 * (a + b));
    return e;
  }
  // integrate on (-1, 1) and rebuild abscissae from the endpoint distance, so
  // nodes close to a or b are placed without cancellation
  const double h = 0.5 * (b - a);
  auto g = [&](double x, double xc) { return f(x < 0.0 ? a - h * xc : b - h * xc); };
  double l1 = 0.0;
  std::size_t levels = 0;
  e.value = h * rule.integrate(g, -1.0, 1.0, rel_tol, &e.error, &l1, &levels);
  e.error *= h;
  return e;
}

/// Double-exponential rule on [a, +inf).
template <class F>
Estimate exp_sinh(F&& f, double a, double rel_tol = 1e-10) {
  static thread_local boost::math::quadrature::exp_sinh<double> rule(12);
  Estimate e;
  double l1 = 0.0;
  std::size_t levels = 0;
  e.value = rule.integrate([&](double t) { return f(a + t); }, 0.0,
                           std::numeric_limits<double>::infinity(), rel_tol, &e.error, &l1, &levels);
  return e;
}

/// Fixed n-point Gauss-Legendre on [a, b].
template <unsigned N, class F>
double gauss(F&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, N>::integrate(f, a, b);
}

/// Root of f on [lo, hi] (sign change required) by TOMS 748 to the given
/// absolute tolerance in x.
template <class F>
double bracket_root(F&& f, double lo, double hi, double x_tol, const char* who,
                    std::uintmax_t max_iter = 200) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    throw solver_error(std::string(who) + ": root is not bracketed", 0.5 * (lo + hi));
  auto tol = [x_tol](double x, double y) { return std::abs(x - y) <= x_tol; };
  std::uintmax_t it = max_iter;
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, it);
  if (it >= max_iter) throw solver_error(std::string(who) + ": iteration budget exhausted", 0.5 * (r.first + r.second));
  return 0.5 * (r.first + r.second);
}

/// Maximum of a unimodal function on [lo, hi] by golden-section search.
template <class F>
std::pair<double, double> golden_max(F&& f, double lo, double hi, double x_tol) {
  constexpr double g = 0.6180339887498949;
  double c = hi - g * (hi - lo);
  double d = lo + g * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  while (hi - lo > x_tol) {
    if (fc < fd) {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = f(d);
    } else {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = f(c);
    }
  }
  return fc > fd ? std::pair{c, fc} : std::pair{d, fd};
}

}  // namespace rieszstop::quad
