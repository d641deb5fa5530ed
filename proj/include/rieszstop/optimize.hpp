#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace rieszstop::opt {

struct NelderMeadConfig {
  int max_evals = 400;
  double x_tol = 1e-9;   ///< simplex diameter (max-norm) at convergence
  double f_tol = 1e-14;  ///< spread of function values at convergence
  double step = 0.1;     ///< initial simplex edge along each axis
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  int evals = 0;
  bool converged = false;
};

/// Nelder-Mead simplex minimization (standard coefficients 1, 2, 1/2, 1/2).
/// Deterministic for a fixed start.
template <class F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> x0, const NelderMeadConfig& cfg = {}) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> s(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) s[i + 1][i] += cfg.step;
  NelderMeadResult res;
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(s[i]);
  res.evals = static_cast<int>(n + 1);

  std::vector<std::size_t> idx(n + 1);
  auto point = [&](const std::vector<double>& c, const std::vector<double>& w, double t) {
    std::vector<double> p(n);
    for (std::size_t j = 0; j < n; ++j) p[j] = c[j] + t * (w[j] - c[j]);
    return p;
  };
  while (res.evals < cfg.max_evals) {
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const std::size_t best = idx.front(), worst = idx.back(), second = idx[n - 1];

    double diam = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t j = 0; j < n; ++j) diam = std::max(diam, std::abs(s[i][j] - s[best][j]));
    if (diam <= cfg.x_tol && fv[worst] - fv[best] <= cfg.f_tol) {
      res.converged = true;
      break;
    }
    if (diam <= cfg.x_tol * 1e-3) {
      res.converged = true;
      break;
    }

    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != worst)
        for (std::size_t j = 0; j < n; ++j) c[j] += s[i][j] / n;

    auto xr = point(c, s[worst], -1.0);
    const double fr = f(xr);
    ++res.evals;
    if (fr < fv[best]) {
      auto xe = point(c, s[worst], -2.0);
      const double fe = f(xe);
      ++res.evals;
      if (fe < fr) {
        s[worst] = xe;
        fv[worst] = fe;
      } else {
        s[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      s[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    auto xc = point(c, outside ? xr : s[worst], 0.5);
    const double fc = f(xc);
    ++res.evals;
    if (fc < (outside ? fr : fv[worst])) {
      s[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      s[i] = point(s[best], s[i], 0.5);
      fv[i] = f(s[i]);
      ++res.evals;
    }
  }
  const std::size_t b = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  res.x = s[b];
  res.f = fv[b];
  return res;
}

}  // namespace rieszstop::opt
