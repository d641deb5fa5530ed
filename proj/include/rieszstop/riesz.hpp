#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rieszstop/error.hpp"
#include "rieszstop/kernels.hpp"
#include "rieszstop/model.hpp"
#include "rieszstop/quadrature.hpp"
#include "rieszstop/special.hpp"

namespace rieszstop {

// anchor: riesz.RepresentingDensity
/// Density of the representing measure of the value function of the
/// investment problem with reward g(y) = K - sum y_i, taken with respect to
/// the same reference measure as the kernel it is paired with. Candidate values
/// carry no harmonic part: the reward is bounded, so it vanishes identically.
struct RepresentingDensity {
  GbmParams params;
  double scale = 1.0;  ///< multiplies the density; 1 for the actual problem
  bool spacetime = false;

  explicit RepresentingDensity(GbmParams p, double scale_ = 1.0, bool spacetime_ = false)
      : params(std::move(p)), scale(scale_), spacetime(spacetime_) {}

  /// Spatial part: rK + sum_i (mu_i - r) y_i.
  double operator()(std::span<const double> y) const {
    double s = params.r * params.K;
    for (int i = 0; i < params.dim(); ++i) s += (params.mu[i] - params.r) * y[i];
    return scale * s;
  }

  double operator()(double y1, double y2) const {
    return scale * (params.r * params.K + (params.mu[0] - params.r) * y1 + (params.mu[1] - params.r) * y2);
  }

  /// Terminal mass (K - y)^+ on {T} x (0, K) for the put problem.
  double terminal_mass(double y) const { return scale * std::max(params.K - y, 0.0); }
};

// anchor: riesz.sigma_density
inline double sigma_density(std::span<const double> y, const GbmParams& params) {
  for (double v : y) detail::require(v > 0.0, "sigma_density: coordinates must be positive");
  detail::require(static_cast<int>(y.size()) == params.dim(), "sigma_density: wrong dimension");
  return RepresentingDensity(params)(y);
}

// anchor: riesz.generator_density
/// (r - G) g at y for a C^2 reward g, with G the generator
///   sum mu_i y_i d_i + 1/2 sum a_i a_j sigma_ij y_i y_j d_ij,
/// by central differences with relative step h. For g = K - sum y_i this is
/// sigma_density.
template <class Reward>
double generator_density(Reward&& g, std::span<const double> y, const GbmParams& params,
                         double h = 1e-4) {
  const int d = params.dim();
  detail::require(static_cast<int>(y.size()) == d, "generator_density: wrong dimension");
  std::vector<double> p(y.begin(), y.end());
  auto eval = [&](int i, double di, int j, double dj) {
    p.assign(y.begin(), y.end());
    if (i >= 0) p[i] += di;
    if (j >= 0) p[j] += dj;
    return g(std::span<const double>(p));
  };
  const double g0 = eval(-1, 0, -1, 0);
  double gen = 0.0;
  const Eigen::MatrixXd cov = params.covariance();
  for (int i = 0; i < d; ++i) {
    const double hi = h * y[i];
    const double gp = eval(i, hi, -1, 0);
    const double gm = eval(i, -hi, -1, 0);
    gen += params.mu[i] * y[i] * (gp - gm) / (2.0 * hi);
    gen += 0.5 * cov(i, i) * y[i] * y[i] * (gp - 2.0 * g0 + gm) / (hi * hi);
    for (int j = 0; j < i; ++j) {
      const double hj = h * y[j];
      const double dij = (eval(i, hi, j, hj) - eval(i, hi, j, -hj) - eval(i, -hi, j, hj) +
                          eval(i, -hi, j, -hj)) /
                         (4.0 * hi * hj);
      gen += cov(i, j) * y[i] * y[j] * dij;
    }
  }
  return params.r * g0 - gen;
}

// anchor: riesz.spacetime_density
/// Representing measure of the put value on [0, T] x (0, inf), relative to
/// dt m(dy): density rK on the interior of the exercise region, and mass
/// (K - y) m(dy) on the terminal slice t = T for y < K.
struct SpaceTimeDensity {
  double interior = 0.0;
  double terminal = 0.0;
};

inline SpaceTimeDensity spacetime_density(double t, double y, double boundary_at_t, const PutParams& p) {
  p.validate();
  detail::require(y > 0.0 && t >= 0.0 && t <= p.T, "spacetime_density: point outside the domain");
  SpaceTimeDensity out;
  if (t < p.T && y < boundary_at_t) out.interior = p.r * p.K;
  if (t == p.T) out.terminal = std::max(p.K - y, 0.0);
  return out;
}

/// Boundary curve u^q + v^q + kappa u^q v^q = 1 in u = x1/p1, v = x2/p2,
/// bounding the region below it in the positive quadrant. kappa = 0 is the
/// superellipse (q = 2 an ellipse, q = 1 a straight segment); kappa bends the
/// middle of the curve while keeping the intercepts and the exchange symmetry
/// of p1 = p2 curves.
struct Superellipse {
  double p1 = 0.0;
  double p2 = 0.0;
  double q = 2.0;
  double kappa = 0.0;

  /// x2 on the curve above x1, for 0 <= x1 <= p1.
  double gamma(double x1) const {
    detail::require(x1 >= 0.0 && x1 <= p1, "boundary_gamma: x1 outside [0, p1]");
    if (x1 == p1) return 0.0;
    const double U = std::pow(x1 / p1, q);
    return p2 * std::pow((1.0 - U) / (1.0 + kappa * U), 1.0 / q);
  }

  /// log gamma(y1) from log y1; -inf at and beyond the intercept.
  double log_gamma_of_log(double log_y1) const {
    const double u = q * (log_y1 - std::log(p1));
    if (u >= 0.0) return -std::numeric_limits<double>::infinity();
    const double U = std::exp(u);
    return std::log(p2) + (std::log1p(-U) - std::log1p(kappa * U)) / q;
  }

  bool contains(double y1, double y2) const {
    if (y1 <= 0.0 || y2 <= 0.0) return false;
    const double U = std::pow(y1 / p1, q);
    const double V = std::pow(y2 / p2, q);
    // U, V <= 1 excludes the second branch of the curve that kappa < 0 opens up far out
    return U <= 1.0 && V <= 1.0 && U + V + kappa * U * V <= 1.0;
  }

  /// max of x1 + x2 over the curve: Hoelder bound for kappa = 0, otherwise a
  /// golden-section search (x1 + gamma(x1) is concave on a convex curve).
  double max_sum() const {
    if (kappa == 0.0) {
      if (q == 1.0) return std::max(p1, p2);
      const double qc = q / (q - 1.0);
      return std::pow(std::pow(p1, qc) + std::pow(p2, qc), 1.0 / qc);
    }
    auto f = [&](double x1) { return x1 + gamma(x1); };
    return std::max({p1, p2, quad::golden_max(f, 0.0, p1, 1e-12 * p1).second});
  }

  /// Concavity of gamma on a sample grid (the region below is then convex).
  bool convex(int samples = 400) const {
    if (q < 1.0) return false;
    if (kappa == 0.0) return true;
    double prev_slope = 0.0;
    double prev = gamma(0.0);
    const double h = p1 / samples;
    for (int i = 1; i <= samples; ++i) {
      const double cur = gamma(i == samples ? p1 : i * h);
      const double slope = (cur - prev) / h;
      if (i > 1 && slope > prev_slope + 1e-12 * p2 / p1) return false;
      prev_slope = slope;
      prev = cur;
    }
    return true;
  }

  void validate(double K) const {
    detail::require(p1 > 0.0 && p2 > 0.0, "ellipsoid: intercepts must be positive");
    detail::require(q >= 1.0 && std::isfinite(q), "ellipsoid: exponent must be >= 1");
    detail::require(kappa > -1.0 && std::isfinite(kappa), "ellipsoid: kappa must exceed -1");
    detail::require(convex(), "ellipsoid: region must be convex");
    detail::require(max_sum() < K, "ellipsoid: region must lie inside {x1 + x2 < K}");
  }
};

/// Piecewise-linear curve t -> b(t) on a grid 0 = t_0 < ... < t_N = T.
struct TimeCurve {
  std::vector<double> t;
  std::vector<double> b;

  double horizon() const { return t.back(); }

  /// Linear interpolation; monotone data stays monotone.
  double at(double s) const {
    detail::require(!t.empty() && s >= t.front() && s <= t.back(), "TimeCurve: time outside the grid");
    auto it = std::upper_bound(t.begin(), t.end(), s);
    if (it == t.end()) return b.back();
    const std::size_t j = static_cast<std::size_t>(it - t.begin());
    if (j == 0) return b.front();
    const double w = (s - t[j - 1]) / (t[j] - t[j - 1]);
    return b[j - 1] + w * (b[j] - b[j - 1]);
  }

  void validate(double K) const {
    detail::require(t.size() >= 2 && t.size() == b.size(), "curve: need matching t and b with >= 2 points");
    detail::require(t.front() == 0.0, "curve: grid must start at 0");
    for (std::size_t i = 1; i < t.size(); ++i)
      detail::require(t[i] > t[i - 1], "curve: grid must be strictly increasing");
    for (double v : b) detail::require(std::isfinite(v) && v >= 0.0 && v <= K, "curve: values must lie in [0, K]");
    detail::require(b.back() == K, "curve: terminal value must equal K");
  }
};

// anchor: riesz.CandidateSet
/// A proposed stopping region: {x <= threshold} in 1D, the region under a
/// superellipse in 2D, or {(t, x): x <= b(t)} for a time-dependent curve.
struct CandidateSet {
  enum class Kind { Threshold, Ellipsoid, Curve };
  Kind kind = Kind::Threshold;
  double threshold = 0.0;
  Superellipse ellipse;
  TimeCurve curve;

  static CandidateSet make_threshold(double xbar) {
    CandidateSet s;
    s.kind = Kind::Threshold;
    s.threshold = xbar;
    return s;
  }
  static CandidateSet make_ellipsoid(double p1, double p2, double q, double kappa = 0.0) {
    CandidateSet s;
    s.kind = Kind::Ellipsoid;
    s.ellipse = {p1, p2, q, kappa};
    return s;
  }
  static CandidateSet make_curve(TimeCurve c) {
    CandidateSet s;
    s.kind = Kind::Curve;
    s.curve = std::move(c);
    return s;
  }

  void validate(double K) const {
    switch (kind) {
      case Kind::Threshold:
        detail::require(threshold > 0.0 && threshold < K, "threshold must lie in (0, K)");
        break;
      case Kind::Ellipsoid: ellipse.validate(K); break;
      case Kind::Curve: curve.validate(K); break;
    }
  }

  bool contains(std::span<const double> x) const {
    switch (kind) {
      case Kind::Threshold: return x[0] <= threshold;
      case Kind::Ellipsoid: return ellipse.contains(x[0], x[1]);
      case Kind::Curve: break;
    }
    throw domain_error("CandidateSet::contains: curve sets need a time coordinate");
  }

  std::string kind_name() const {
    switch (kind) {
      case Kind::Threshold: return "threshold";
      case Kind::Ellipsoid: return "ellipse";
      case Kind::Curve: return "curve";
    }
    return "";
  }
};

// anchor: riesz.candidate_value_1d
/// int_0^xbar G(x, y) sigma(y) m(dy) in closed form, for general mu <= r.
/// With c = 1/sqrt(D) the kernel constant 2/(a^2 (theta + beta)):
///   x >= xbar:  c x^{-theta} I(xbar)
///   x <  xbar:  c [x^{-theta} I(x) + x^beta J(x, xbar)]
/// I(u) = rK u^theta/theta + (mu - r) u^{theta+1}/(theta+1) and J the matching
/// integral of y^{-beta-1} sigma(y) over (x, xbar).
inline double candidate_value_1d(double xbar, double x, const GbmParams& params, double scale = 1.0) {
  detail::require(params.dim() == 1, "candidate_value_1d: one-dimensional parameters required");
  detail::require(xbar > 0.0 && xbar < params.K, "candidate_value_1d: threshold must lie in (0, K)");
  detail::require(x > 0.0, "candidate_value_1d: x must be positive");
  const auto k = kernels::Kernel1D::from_params(params);
  const double rK = params.r * params.K;
  const double dm = params.mu[0] - params.r;
  const double c = 2.0 / (k.a * k.a * (k.theta + k.beta));
  const double th = k.theta;
  const double be = k.beta;
  // x^{-theta} I(u) written with ratios (u/x) to keep large exponents finite
  auto below = [&](double u) {
    const double ratio = std::pow(u / x, th);
    return rK * ratio / th + dm * ratio * u / (th + 1.0);
  };
  if (x >= xbar) return scale * c * below(xbar);
  double above = rK * (1.0 - std::pow(x / xbar, be)) / be;
  if (dm != 0.0) {
    if (be == 1.0)
      above += dm * x * std::log(xbar / x);
    else
      above += dm * x * (std::pow(xbar / x, 1.0 - be) - 1.0) / (1.0 - be);
  }
  return scale * c * (below(x) + above);
}

/// Same integral by quadrature of green_1d against sigma and the speed
/// density, split at the kernel kink y = x.
inline quad::Estimate candidate_value_1d_quadrature(double xbar, double x, const GbmParams& params,
                                                    double rel_tol = 1e-13) {
  detail::require(params.dim() == 1, "candidate_value_1d: one-dimensional parameters required");
  detail::require(xbar > 0.0 && xbar < params.K && x > 0.0, "candidate_value_1d: bad arguments");
  const auto k = kernels::Kernel1D::from_params(params);
  const RepresentingDensity sigma(params);
  auto f = [&](double y) {
    if (y <= 0.0) return 0.0;
    const double gm = kernels::green_1d(x, y, k) * k.speed_density(y);
    if (std::isfinite(gm) && gm > 0.0) return gm * sigma(std::span<const double>(&y, 1));
    // far tail: kernel and speed density under/overflow separately
    const double lo = std::min(x, y), hi = std::max(x, y);
    const double lg = k.beta * std::log(lo) - k.theta * std::log(hi) - std::log(k.theta + k.beta) +
                      std::log(2.0 / (k.a * k.a)) + k.speed_exponent() * std::log(y);
    return std::exp(lg) * sigma(std::span<const double>(&y, 1));
  };
  quad::Estimate total;
  const double split = std::min(x, xbar);
  auto add = [&](double lo, double hi) {
    if (hi <= lo) return;
    auto e = quad::tanh_sinh(f, lo, hi, rel_tol);
    total.value += e.value;
    total.error += e.error;
  };
  add(0.0, split);
  add(split, xbar);
  return total;
}

/// Options for two-dimensional candidate values.
struct Quad2DConfig {
  enum class Method { Polar, Slices };
  enum class OuterLimit { Intercept, OneDimOptimum };
  Method method = Method::Polar;
  OuterLimit outer_limit = OuterLimit::Intercept;
  double rel_tol = 1e-7;
  /// y1 limit used with OuterLimit::OneDimOptimum; 0 means "compute it".
  double one_dim_optimum = 0.0;
  /// Rays are truncated where the kernel has decayed by e^{-tail}.
  double tail = 40.0;
};

namespace detail {

/// Region {y in S} expressed in log-coordinates around x:
/// z_i = log(y_i/x_i)/a_i. margin(z) >= 0 inside; margin is concave.
struct LogRegion {
  Superellipse e;
  double lx1, lx2, a1, a2;
  double z1_max;  ///< from the y1 cap (intercept or 1D optimum)

  double margin(double z1, double z2) const {
    const double lg = e.log_gamma_of_log(lx1 + a1 * z1);
    const double m1 = (lg - lx2) / a2 - z2;
    return std::min(m1, z1_max - z1);
  }

  /// Upper limit of z2 at z1 (-inf outside the y1 range).
  double phi(double z1) const {
    if (z1 >= z1_max) return -std::numeric_limits<double>::infinity();
    return (e.log_gamma_of_log(lx1 + a1 * z1) - lx2) / a2;
  }
};

inline double ray_bisect(const LogRegion& reg, double c, double s, double lo, double hi, bool inside_lo) {
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    const bool in = reg.margin(mid * c, mid * s) >= 0.0;
    if (in == inside_lo)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// anchor: riesz.candidate_value_2d
/// int int_S resolvent_2d(x, y) sigma(y) dy over the region under a
/// superellipse. The integral is taken in log-coordinates centered at x, where
/// the region is convex; the default route integrates in polar coordinates
/// around x, which absorbs the logarithmic kernel singularity. The slice route
/// follows the iterated y1/y2 form and serves as a cross-check.
inline quad::Estimate candidate_value_2d(const CandidateSet& set, std::span<const double> x,
                                         const GbmParams& params, const Quad2DConfig& cfg = {},
                                         double scale = 1.0) {
  detail::require(set.kind == CandidateSet::Kind::Ellipsoid, "candidate_value_2d: ellipsoid set required");
  detail::require(x.size() == 2 && x[0] > 0.0 && x[1] > 0.0, "candidate_value_2d: x must be positive 2D");
  set.validate(params.K);
  const auto k = kernels::Kernel2D::from_params(params);
  const RepresentingDensity sigma(params, scale);

  double cap = set.ellipse.p1;
  if (cfg.outer_limit == Quad2DConfig::OuterLimit::OneDimOptimum) {
    detail::require(cfg.one_dim_optimum > 0.0, "candidate_value_2d: one_dim_optimum must be set");
    cap = std::min(cap, cfg.one_dim_optimum);
  }
  const detail::LogRegion reg{set.ellipse, std::log(x[0]), std::log(x[1]), k.a1, k.a2,
                              (std::log(cap) - std::log(x[0])) / k.a1};
  if (scale == 0.0) return {};

  auto integrand = [&](double z1, double z2) {
    if (z1 * z1 + z2 * z2 < 1e-280) return 0.0;  // the start point itself carries no mass
    const double y1 = x[0] * std::exp(k.a1 * z1);
    const double y2 = x[1] * std::exp(k.a2 * z2);
    return k.log_density(z1, z2) * sigma(y1, y2);
  };

  quad::Estimate total;
  if (cfg.method == Quad2DConfig::Method::Polar) {
    auto ray = [&](double th) -> double {
      const double c = std::cos(th);
      const double s = std::sin(th);
      const double rate = k.decay_rate(c, s);
      if (!(rate > 0.0)) throw solver_error("candidate_value_2d: kernel does not decay along a ray");
      const double R = cfg.tail / rate;
      auto f = [&](double rho) { return reg.margin(rho * c, rho * s); };
      double lo = 0.0;
      double hi = R;
      if (f(0.0) >= 0.0) {
        if (f(R) < 0.0) hi = detail::ray_bisect(reg, c, s, 0.0, R, true);
      } else {
        const auto [rm, fm] = quad::golden_max(f, 0.0, R, 1e-12 * R);
        if (!(fm >= 0.0)) return 0.0;
        lo = detail::ray_bisect(reg, c, s, 0.0, rm, false);
        hi = f(R) >= 0.0 ? R : detail::ray_bisect(reg, c, s, rm, R, true);
      }
      if (hi <= lo) return 0.0;
      auto g = [&](double rho) { return rho > 0.0 ? rho * integrand(rho * c, rho * s) : 0.0; };
      return quad::tanh_sinh(g, lo, hi, 0.1 * cfg.rel_tol).value;
    };

    // Angular pieces: cardinal directions plus, for a boundary point, the
    // tangent direction, across which the ray segment collapses to a point.
    std::vector<double> cuts;
    const double pi = std::numbers::pi;
    double start = 0.0;
    const double m0 = reg.margin(0.0, 0.0);
    if (std::abs(m0) < 1e-9 && reg.z1_max > 1e-9) {
      const double h = 1e-6;
      const double slope = (reg.phi(h) - reg.phi(-h)) / (2.0 * h);
      start = std::atan2(slope, 1.0) + pi;  // the region lies to the right of this ray, below the tangent
      cuts = {start, start + pi};
    } else if (m0 < 0.0) {
      // Outside: only the cone of directions between the two tangent rays
      // meets the region, and the ray integral has square-root kinks there.
      auto hits = [&](double th) {
        const double c = std::cos(th), s = std::sin(th);
        const double rate = k.decay_rate(c, s);
        const double R = rate > 0.0 ? cfg.tail / rate : 1e3;
        return quad::golden_max([&](double rho) { return reg.margin(rho * c, rho * s); }, 0.0, R, 1e-12 * R)
                   .second >= 0.0;
      };
      const double cap_y1 = std::exp(reg.lx1 + k.a1 * reg.z1_max) / 3.0;
      const double inner_z1 = (std::log(cap_y1) - reg.lx1) / k.a1;
      const double inner_z2 = (reg.e.log_gamma_of_log(std::log(cap_y1)) - std::log(2.0) - reg.lx2) / k.a2;
      const double th0 = std::atan2(inner_z2, inner_z1);
      auto edge = [&](double miss) {
        double in = th0, out = miss;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (in + out);
          (hits(mid) ? in : out) = mid;
        }
        return in;
      };
      cuts = {edge(th0 - pi), edge(th0 + pi)};
    } else {
      cuts = {0.0, 2.0 * pi};
    }
    for (int j = -4; j <= 8; ++j) {
      const double a = j * 0.5 * pi;
      if (a > cuts.front() + 1e-12 && a < cuts.back() - 1e-12) cuts.push_back(a);
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      auto e = quad::adaptive(ray, cuts[i], cuts[i + 1], cfg.rel_tol, 12);
      total.value += e.value;
      total.error += e.error;
    }
  } else {
    // iterated integral: z1 over (-inf, z1_max), z2 over (-inf, phi(z1))
    auto inner = [&](double z1) -> double {
      const double top = reg.phi(z1);
      if (!std::isfinite(top)) return 0.0;
      auto f = [&](double z2) { return integrand(z1, z2); };
      double v = 0.0;
      if (z1 == 0.0 && top > 0.0) return 0.0;  // measure-zero line through the singularity
      if (top > 0.0 && std::abs(z1) < 1.0) {
        v += quad::tanh_sinh(f, 0.0, top, cfg.rel_tol).value;
        v += quad::exp_sinh([&](double t) { return f(-t); }, 0.0, cfg.rel_tol).value;
      } else {
        v += quad::exp_sinh([&](double t) { return f(top - t); }, 0.0, cfg.rel_tol).value;
      }
      return v;
    };
    const double zmax = reg.z1_max;
    if (zmax > 0.0) {
      auto e = quad::tanh_sinh(inner, 0.0, zmax, cfg.rel_tol);
      total.value += e.value;
      total.error += e.error;
      auto e2 = quad::exp_sinh([&](double t) { return inner(-t); }, 0.0, cfg.rel_tol);
      total.value += e2.value;
      total.error += e2.error;
    } else {
      auto e = quad::exp_sinh([&](double t) { return inner(zmax - t); }, 0.0, cfg.rel_tol);
      total.value += e.value;
      total.error += e.error;
    }
  }
  const double floor = 1e-12 * params.K;
  if (!(total.error <= 1e3 * cfg.rel_tol * std::abs(total.value) + floor) || !std::isfinite(total.value))
    throw solver_error("candidate_value_2d: quadrature did not reach the requested tolerance", total.value);
  return total;
}

// anchor: riesz.candidate_value_spacetime
/// Space-time Riesz integral of the put candidate region {x <= b(t)}:
///   rK int_s^T e^{-r(t-s)} P_{s,x}(X_t < b(t)) dt
///     + int G((s,x),(T,y)) (K - y)^+ m(dy),
/// X with drift r. The inner space integral of the interior part is the
/// crossing probability; the terminal part is integrated against the kernel.
inline double candidate_value_spacetime(const CandidateSet& set, double s, double x, const PutParams& p,
                                        double rel_tol = 1e-10) {
  detail::require(set.kind == CandidateSet::Kind::Curve, "candidate_value_spacetime: curve set required");
  p.validate();
  detail::require(s >= 0.0 && s < p.T, "candidate_value_spacetime: need 0 <= s < T");
  detail::require(x > 0.0, "candidate_value_spacetime: x must be positive");
  const TimeCurve& c = set.curve;
  detail::require(std::abs(c.horizon() - p.T) <= 1e-12 * p.T, "candidate_value_spacetime: curve horizon differs from T");
  const double v = p.vol;
  const double nu = p.r - 0.5 * v * v;

  auto prob_below = [&](double t) {
    const double tau = t - s;
    const double level = c.at(std::min(t, c.horizon()));
    if (level <= 0.0) return 0.0;
    return special::norm_cdf((std::log(level / x) - nu * tau) / (v * std::sqrt(tau)));
  };
  // substitute t = s + w^2 so the sqrt(t - s) behaviour at the left end is smooth
  auto premium_w = [&](double w) {
    if (w <= 0.0) return 0.0;
    const double t = s + w * w;
    return 2.0 * w * std::exp(-p.r * w * w) * prob_below(t);
  };
  double premium = 0.0;
  // integrate cell by cell so the kinks of the piecewise-linear curve sit on cell edges
  auto first = std::upper_bound(c.t.begin(), c.t.end(), s);
  double lo = s;
  for (auto it = first; it != c.t.end(); ++it) {
    const double hi = std::min(*it, p.T);
    if (hi > lo) premium += quad::adaptive(premium_w, std::sqrt(lo - s), std::sqrt(hi - s), rel_tol, 10).value;
    lo = hi;
  }
  premium *= p.r * p.K;

  const auto k = kernels::SpaceTimeKernel::from_put(p);
  auto terminal = [&](double y) {
    return y > 0.0 ? kernels::spacetime_kernel(s, x, p.T, y, k) * (p.K - y) * k.speed_density(y) : 0.0;
  };
  // mass concentrates around the lognormal bulk; split there for accuracy
  const double tau = p.T - s;
  const double mid = std::clamp(x * std::exp(nu * tau), 1e-12 * p.K, p.K);
  double european = 0.0;
  if (mid > 0.0) european += quad::tanh_sinh(terminal, 0.0, mid, rel_tol).value;
  if (mid < p.K) european += quad::tanh_sinh(terminal, mid, p.K, rel_tol).value;
  return premium + european;
}

}  // namespace rieszstop
