#pragma once

#include <cmath>
#include <vector>

#include "rieszstop/error.hpp"
#include "rieszstop/kernels.hpp"
#include "rieszstop/model.hpp"
#include "rieszstop/quadrature.hpp"
#include "rieszstop/riesz.hpp"

namespace rieszstop::perpetual {

/// Optimal threshold and value of sup_tau E[e^{-r tau}(K - X_tau)^+] for
/// one-dimensional GBM. For mu = r, theta = gamma = 2r/a^2; for mu < r,
/// theta is the positive root of a^2/2 k(k+1) - mu k - r = 0.
struct PerpetualSolution {
  double x_star = 0.0;
  double gamma = 0.0;
  double theta = 0.0;
  double K = 0.0;
  double root_check = 0.0;  ///< threshold found by value matching

  double value(double x) const {
    detail::require(x > 0.0, "perpetual_value: x must be positive");
    if (x <= x_star) return K - x;
    return (K - x_star) * std::pow(x / x_star, -theta);
  }
};

/// F(xbar) = (K - xbar) - V_xbar(xbar): value-matching defect of the
/// threshold candidate. Negative for thresholds above the optimum.
inline double value_matching_defect(double xbar, const GbmParams& params) {
  return (params.K - xbar) - candidate_value_1d(xbar, xbar, params);
}

// anchor: perpetual.solve_perpetual
/// Closed-form threshold theta K / (1 + theta), confirmed by a bracketing
/// root search on the value-matching defect over (eps K, (1 - eps) K).
inline PerpetualSolution solve_perpetual(const GbmParams& params, double agree_tol = 1e-10) {
  detail::require(params.dim() == 1, "solve_perpetual: one-dimensional parameters required");
  params.validate();
  params.require_drifts_below_rate();
  const auto k = kernels::Kernel1D::from_params(params);
  PerpetualSolution sol;
  sol.K = params.K;
  sol.gamma = k.gamma;
  sol.theta = k.theta;
  sol.x_star = k.theta * params.K / (1.0 + k.theta);

  const double eps = 1e-6;
  auto F = [&](double xbar) { return value_matching_defect(xbar, params); };
  sol.root_check = quad::bracket_root(F, eps * params.K, (1.0 - eps) * params.K, 1e-14 * params.K,
                                      "solve_perpetual");
  if (std::abs(sol.root_check - sol.x_star) > agree_tol * params.K)
    throw solver_error("solve_perpetual: value-matching root disagrees with the closed form", sol.root_check);
  return sol;
}

// anchor: perpetual.perpetual_value
inline double perpetual_value(double x, const PerpetualSolution& sol) { return sol.value(x); }

}  // namespace rieszstop::perpetual
