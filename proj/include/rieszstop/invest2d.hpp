#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "rieszstop/error.hpp"
#include "rieszstop/kernels.hpp"
#include "rieszstop/model.hpp"
#include "rieszstop/optimize.hpp"
#include "rieszstop/parallel.hpp"
#include "rieszstop/riesz.hpp"

namespace rieszstop::invest2d {

/// Stopping boundary x2 = gamma(x1) = p2 ((1 - U)/(1 + kappa U))^{1/q},
/// U = (x1/p1)^q. q near 1 with kappa < 0 gives finite slopes at the axes.
using EllipsoidBoundary = Superellipse;

// anchor: invest2d.boundary_gamma
inline double boundary_gamma(double x1, const EllipsoidBoundary& b) { return b.gamma(x1); }

struct ShapeCheck {
  bool positive_intercepts = false;
  bool convex = false;          ///< q >= 1
  bool inside_reward_set = false;  ///< region inside {x1 + x2 < K}
  bool ok() const { return positive_intercepts && convex && inside_reward_set; }
};

// anchor: invest2d.validate_boundary
/// Shape requirements of a stopping region for this problem: a closed convex,
/// southwest-connected set inside {g > 0} = {x1 + x2 < K}. The region under a
/// superellipse is southwest-connected by construction.
inline ShapeCheck validate_boundary(const EllipsoidBoundary& b, double K) {
  ShapeCheck c;
  c.positive_intercepts = b.p1 > 0.0 && b.p2 > 0.0 && std::isfinite(b.p1) && std::isfinite(b.p2);
  c.convex = b.q >= 1.0 && std::isfinite(b.q) && b.kappa > -1.0 && std::isfinite(b.kappa) && b.convex();
  c.inside_reward_set = c.positive_intercepts && c.convex && b.max_sum() < K;
  return c;
}

struct ResidualPoint {
  double x1 = 0.0;
  double x2 = 0.0;
  double residual = 0.0;
  double quad_error = 0.0;
};

struct ResidualReport {
  std::vector<ResidualPoint> points;
  double sup = 0.0;
  double l2 = 0.0;  ///< root mean square over the points

  void finish() {
    sup = 0.0;
    double ss = 0.0;
    for (const auto& p : points) {
      sup = std::max(sup, std::abs(p.residual));
      ss += p.residual * p.residual;
    }
    l2 = points.empty() ? 0.0 : std::sqrt(ss / points.size());
  }
};

/// Threshold of the one-dimensional problem for factor i alone.
inline double one_dim_threshold(const GbmParams& params, int i) {
  const auto k = kernels::Kernel1D::make(params.mu[i], params.a[i], params.r);
  return k.theta * params.K / (1.0 + k.theta);
}

/// Quadrature options with the outer limit resolved for these parameters.
inline Quad2DConfig resolve_quad(const GbmParams& params, Quad2DConfig q) {
  if (q.outer_limit == Quad2DConfig::OuterLimit::OneDimOptimum && q.one_dim_optimum <= 0.0)
    q.one_dim_optimum = one_dim_threshold(params, 0);
  return q;
}

// anchor: invest2d.residual_at
/// (K - x1 - gamma(x1)) - int int_S G_r((x1, gamma(x1)), y) sigma(y) dy.
inline ResidualPoint residual_at(double x1, const EllipsoidBoundary& b, const GbmParams& params,
                                 const Quad2DConfig& quad = {}, double sigma_scale = 1.0) {
  detail::require(x1 > 0.0 && x1 < b.p1, "residual_at: x1 must lie in (0, p1)");
  ResidualPoint p;
  p.x1 = x1;
  p.x2 = b.gamma(x1);
  detail::require(p.x2 > 0.0, "residual_at: boundary point is on the axis");
  const std::array<double, 2> x{p.x1, p.x2};
  const auto set = CandidateSet::make_ellipsoid(b.p1, b.p2, b.q, b.kappa);
  const auto v = candidate_value_2d(set, x, params, resolve_quad(params, quad), sigma_scale);
  p.residual = (params.K - p.x1 - p.x2) - v.value;
  p.quad_error = v.error;
  return p;
}

/// Chebyshev nodes p1 (1 - cos(pi (k + 1/2)/n)) / 2, k = 0..n-1, strictly
/// inside (0, p1).
inline std::vector<double> collocation_nodes(double p1, int n) {
  std::vector<double> x(n);
  for (int k = 0; k < n; ++k) x[k] = 0.5 * p1 * (1.0 - std::cos(std::numbers::pi * (k + 0.5) / n));
  return x;
}

/// Nodes on (0, x_d) clustered at the axis, x_d the diagonal point of a
/// p1 = p2 curve; with exchange symmetry the other half mirrors these.
inline std::vector<double> half_curve_nodes(const EllipsoidBoundary& b, int m) {
  const double U = b.kappa == 0.0 ? 0.5 : (std::sqrt(1.0 + b.kappa) - 1.0) / b.kappa;
  const double xd = b.p1 * std::pow(U, 1.0 / b.q);
  std::vector<double> x(m);
  for (int k = 0; k < m; ++k) x[k] = xd * (1.0 - std::cos(0.5 * std::numbers::pi * (k + 0.5) / m));
  return x;
}

inline ResidualReport residual_report_at(const std::vector<double>& nodes, const EllipsoidBoundary& b,
                                         const GbmParams& params, const Quad2DConfig& quad = {}) {
  ResidualReport rep;
  rep.points = detail::parallel_map<ResidualPoint>(
      nodes.size(), [&](std::size_t k) { return residual_at(nodes[k], b, params, quad); });
  rep.finish();
  return rep;
}

inline ResidualReport residual_report(const EllipsoidBoundary& b, const GbmParams& params, int n,
                                      const Quad2DConfig& quad = {}) {
  return residual_report_at(collocation_nodes(b.p1, n), b, params, quad);
}

struct FitConfig {
  int collocation = 16;
  Quad2DConfig quad;
  /// Quadrature tolerance inside the optimizer; the final report uses quad.
  double search_rel_tol = 1e-5;
  opt::NelderMeadConfig optimizer{300, 1e-7, 1e-14, 0.15};
  std::vector<double> q_starts{1.2, 1.6};
  double kappa_start = -0.3;
  int restarts = 2;  ///< Nelder-Mead restarts from the last optimum
  bool fix_q = false;  ///< keep q at q_starts[0] (e.g. q = 1 straight-line family)
  bool fit_kappa = true;  ///< false restricts the family to plain superellipses
  enum class Symmetry { Auto, Force, Off };
  Symmetry symmetry = Symmetry::Auto;
};

struct FitResult {
  EllipsoidBoundary boundary;
  ResidualReport report;
  bool converged = false;
  bool symmetric = false;
  int evaluations = 0;
};

inline bool exchange_symmetric(const GbmParams& p) {
  return p.dim() == 2 && p.mu[0] == p.mu[1] && std::abs(p.a[0]) == std::abs(p.a[1]);
}

// anchor: invest2d.fit_boundary
/// Fits (p1, p2, q, kappa) by minimizing the RMS value-matching residual over
/// Chebyshev collocation points, starting from the one-dimensional thresholds.
/// Intercepts are optimized as K * logistic(u) and the exponent as 1 + e^v;
/// candidates that are not convex or leave {x1 + x2 < K} get a penalty. With
/// exchange-symmetric parameters the fit is run on p1 = p2 and collocates on
/// one half of the curve. Each q start is restarted from its optimum, which
/// guards against a collapsed simplex.
inline FitResult fit_boundary(const GbmParams& params, const FitConfig& cfg = {}) {
  detail::require(params.dim() == 2, "fit_boundary: two-dimensional parameters required");
  params.validate();
  params.require_drifts_below_rate();
  if (cfg.collocation < 3)
    throw config_error("fit_boundary: at least 3 collocation points are needed for 3 boundary parameters");
  if (cfg.q_starts.empty()) throw config_error("fit_boundary: q_starts must not be empty");

  const double K = params.K;
  const bool sym = cfg.symmetry == FitConfig::Symmetry::Force ||
                   (cfg.symmetry == FitConfig::Symmetry::Auto && exchange_symmetric(params));
  const Quad2DConfig quad = resolve_quad(params, cfg.quad);
  Quad2DConfig search = quad;
  search.rel_tol = std::max(quad.rel_tol, cfg.search_rel_tol);

  auto logit = [](double u) { return std::log(u / (1.0 - u)); };
  auto logistic = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  auto decode = [&](const std::vector<double>& z, double q_fixed) {
    EllipsoidBoundary b;
    b.p1 = K * logistic(z[0]);
    std::size_t next = 1;
    b.p2 = sym ? b.p1 : K * logistic(z[next++]);
    if (!cfg.fix_q) b.q = 1.0 + std::exp(z[next++]);
    else b.q = q_fixed;
    if (cfg.fit_kappa) b.kappa = z[next];
    return b;
  };
  auto objective = [&](const EllipsoidBoundary& b) {
    const auto shape = validate_boundary(b, K);
    if (!shape.ok()) return 1e3 * (1.0 + b.max_sum() / K);
    try {
      if (sym) return residual_report_at(half_curve_nodes(b, (cfg.collocation + 1) / 2), b, params, search).l2;
      return residual_report(b, params, cfg.collocation, search).l2;
    } catch (const solver_error&) {
      return 1e3;
    }
  };

  const double s1 = one_dim_threshold(params, 0);
  const double s2 = one_dim_threshold(params, 1);
  FitResult best;
  double best_f = std::numeric_limits<double>::infinity();
  for (double q0 : cfg.q_starts) {
    detail::require(q0 >= 1.0, "fit_boundary: starting exponent must be >= 1");
    std::vector<double> z{logit(s1 / K)};
    if (!sym) z.push_back(logit(s2 / K));
    if (!cfg.fix_q) z.push_back(std::log(std::max(q0 - 1.0, 1e-3)));
    if (cfg.fit_kappa) z.push_back(cfg.kappa_start);
    auto f = [&](const std::vector<double>& zz) { return objective(decode(zz, q0)); };
    auto r = opt::nelder_mead(f, z, cfg.optimizer);
    best.evaluations += r.evals;
    for (int k = 0; k < cfg.restarts; ++k) {
      auto again = opt::nelder_mead(f, r.x, cfg.optimizer);
      best.evaluations += again.evals;
      const bool improved = again.f < r.f - cfg.optimizer.f_tol;
      if (again.f < r.f) r = std::move(again);
      if (!improved) break;
    }
    if (r.f < best_f) {
      best_f = r.f;
      best.boundary = decode(r.x, q0);
      best.converged = r.converged;
    }
  }
  best.symmetric = sym;
  best.report = residual_report(best.boundary, params, cfg.collocation, quad);
  return best;
}

struct UniquenessReport {
  double fitted_norm = 0.0;
  std::vector<double> factors;
  std::vector<double> norms;  ///< +inf where the scaled region is not admissible
  bool pass = false;
};

// anchor: invest2d.uniqueness_gate
/// Residual norms of the boundary scaled by (c p1, c p2) for each factor c.
/// Passes when the fitted boundary has the strictly smallest norm.
inline UniquenessReport uniqueness_gate(const EllipsoidBoundary& b, const std::vector<double>& factors,
                                        const GbmParams& params, const Quad2DConfig& quad = {},
                                        int collocation = 16) {
  for (double c : factors) detail::require(c > 0.0 && c != 1.0, "uniqueness_gate: factors must be positive and != 1");
  UniquenessReport rep;
  rep.factors = factors;
  rep.fitted_norm = residual_report(b, params, collocation, quad).l2;
  rep.pass = true;
  for (double c : factors) {
    EllipsoidBoundary s{c * b.p1, c * b.p2, b.q, b.kappa};
    double n = std::numeric_limits<double>::infinity();
    if (validate_boundary(s, params.K).ok()) n = residual_report(s, params, collocation, quad).l2;
    rep.norms.push_back(n);
    if (!(n > rep.fitted_norm)) rep.pass = false;
  }
  return rep;
}

}  // namespace rieszstop::invest2d
