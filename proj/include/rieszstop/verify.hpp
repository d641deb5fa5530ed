#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "rieszstop/amput.hpp"
#include "rieszstop/error.hpp"
#include "rieszstop/model.hpp"
#include "rieszstop/parallel.hpp"
#include "rieszstop/riesz.hpp"
#include "rieszstop/rng.hpp"

namespace rieszstop::verify {

struct McConfig {
  int paths = 100000;
  double dt = 1e-3;  ///< monitoring step for exit and entry detection
  std::uint64_t seed = 20240611;
  double k_se = 3.0;  ///< pass if |lhs - rhs| <= k_se * combined SE
  int blocks = 64;    ///< fixed work partition; results do not depend on the thread count
};

struct IdentityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double lhs_se = 0.0;
  double rhs_se = 0.0;
  double k_se = 3.0;
  std::uint64_t seed = 0;
  int paths = 0;
  bool pass = false;

  double diff() const { return lhs - rhs; }
  double combined_se() const { return std::hypot(lhs_se, rhs_se); }
  /// k_se combined standard errors, plus rounding slack for exact sides.
  void decide() {
    pass = std::abs(diff()) <= k_se * combined_se() + 1e-13 * std::max(std::abs(lhs), std::abs(rhs));
  }
};

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(std::span<const double> x) const {
    for (int i = 0; i < dim(); ++i)
      if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
    return true;
  }
  bool strictly_contains(std::span<const double> x) const {
    for (int i = 0; i < dim(); ++i)
      if (!(x[i] > lo[i] && x[i] < hi[i])) return false;
    return true;
  }
};

struct Estimate {
  double value = 0.0;
  double se = 0.0;
  std::uint64_t seed = 0;
  int paths = 0;
};

namespace detail {

using rieszstop::detail::Moments;
using rieszstop::detail::require;

/// Runs `per_path(rng)` for mc.paths paths split into mc.blocks blocks; block
/// b uses stream b of the seed and results are merged in block order.
template <class PerPath>
Moments run_paths(const McConfig& mc, std::uint64_t stream, PerPath&& per_path) {
  require(mc.paths >= 1 && mc.blocks >= 1, "McConfig: paths and blocks must be positive");
  const CounterRng root = CounterRng(mc.seed, stream);
  const int blocks = std::min(mc.blocks, mc.paths);
  const auto parts = rieszstop::detail::parallel_map<Moments>(blocks, [&](std::size_t b) {
    CounterRng rng = root.split(b);
    const int n = mc.paths / blocks + (static_cast<int>(b) < mc.paths % blocks ? 1 : 0);
    Moments m;
    for (int i = 0; i < n; ++i) m.add(per_path(rng));
    return m;
  });
  Moments all;
  for (const auto& p : parts) all.merge(p);
  return all;
}

inline void check_box(const Box& b, int d, const char* who) {
  require(b.dim() == d && static_cast<int>(b.hi.size()) == d, who);
  for (int i = 0; i < d; ++i) require(b.lo[i] > 0.0 && b.hi[i] > b.lo[i], who);
}

/// Cubic Lagrange interpolation of a function tabulated on a uniform grid in
/// log-coordinates. Points outside the inner cells fall back to `exact`.
template <class Exact>
struct LogGridInterpolant {
  std::array<double, 2> lo{}, step{};
  int n = 0;
  std::vector<double> values;
  Exact exact;

  double operator()(double y1, double y2) const {
    const double u1 = (std::log(y1) - lo[0]) / step[0];
    const double u2 = (std::log(y2) - lo[1]) / step[1];
    const int i1 = static_cast<int>(std::floor(u1)) - 1;
    const int i2 = static_cast<int>(std::floor(u2)) - 1;
    if (i1 < 0 || i2 < 0 || i1 + 3 >= n || i2 + 3 >= n) return exact(y1, y2);
    const auto w1 = weights(u1 - i1);
    const auto w2 = weights(u2 - i2);
    double v = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) v += w1[a] * w2[b] * values[(i1 + a) * n + (i2 + b)];
    return v;
  }

  // Lagrange weights for nodes 0, 1, 2, 3 at position t.
  static std::array<double, 4> weights(double t) {
    return {-(t - 1) * (t - 2) * (t - 3) / 6.0, t * (t - 2) * (t - 3) / 2.0, -t * (t - 1) * (t - 3) / 2.0,
            t * (t - 1) * (t - 2) / 6.0};
  }
};

template <class Exact>
LogGridInterpolant<Exact> tabulate(const Box& box, double margin, int n, Exact exact) {
  LogGridInterpolant<Exact> g{{}, {}, n, {}, std::move(exact)};
  require(n >= 5, "tabulate: need at least 5 nodes per axis");
  // one extra cell on each side: the cubic stencil needs a neighbour beyond the margin
  for (int i = 0; i < 2; ++i) {
    g.step[i] = (std::log(box.hi[i] / box.lo[i]) + 2.0 * margin) / (n - 3);
    g.lo[i] = std::log(box.lo[i]) - margin - g.step[i];
  }
  g.values = rieszstop::detail::parallel_map<double>(static_cast<std::size_t>(n) * n, [&](std::size_t k) {
    const int i = static_cast<int>(k) / n;
    const int j = static_cast<int>(k) % n;
    return g.exact(std::exp(g.lo[0] + i * g.step[0]), std::exp(g.lo[1] + j * g.step[1]));
  });
  return g;
}

}  // namespace detail

// anchor: verify.check_duality
/// Two sides of int_A h(x) G_r 1_B(x) dx = int_B h(y) G_r 1_A(y) dy. Start
/// points are drawn log-uniformly in the outer box and weighted by h(x) x_1..x_d
/// times the log-volume; the discounted occupation G_r 1_B(x) is estimated as
/// P_x(X_T in B) / r with an independent killing time T ~ Exp(r), which is
/// exact for GBM since X_T is sampled in one step.
inline IdentityReport check_duality(const GbmParams& params, const Box& boxA, const Box& boxB,
                                    const McConfig& mc = {}) {
  params.validate();
  const int d = params.dim();
  detail::check_box(boxA, d, "check_duality: boxes must be nondegenerate and inside the orthant");
  detail::check_box(boxB, d, "check_duality: boxes must be nondegenerate and inside the orthant");
  const DualDensity h(params);
  GbmStepper proto(params);

  auto side = [&](const Box& outer, const Box& inner, std::uint64_t stream) {
    double log_vol = 1.0;
    for (int i = 0; i < d; ++i) log_vol *= std::log(outer.hi[i] / outer.lo[i]);
    return detail::run_paths(mc, stream, [&, log_vol](CounterRng& rng) {
      thread_local std::vector<double> x;
      x.resize(d);
      double jac = 1.0;
      for (int i = 0; i < d; ++i) {
        x[i] = outer.lo[i] * std::pow(outer.hi[i] / outer.lo[i], rng.uniform());
        jac *= x[i];
      }
      const double weight = h(x) * jac * log_vol / params.r;
      const double T = -std::log(rng.uniform()) / params.r;
      GbmStepper st = proto;
      std::normal_distribution<double> normal;
      st.step(x, T, rng, normal);
      return inner.contains(x) ? weight : 0.0;
    });
  };
  const auto l = side(boxA, boxB, 1);
  const auto r = side(boxB, boxA, 2);
  IdentityReport rep;
  rep.lhs = l.mean();
  rep.lhs_se = l.se();
  rep.rhs = r.mean();
  rep.rhs_se = r.se();
  rep.k_se = mc.k_se;
  rep.seed = mc.seed;
  rep.paths = mc.paths;
  rep.decide();
  return rep;
}

struct DynkinOptions {
  int grid = 33;            ///< nodes per axis for tabulating a 2D candidate value
  double sigma_scale = 1.0; ///< 0 gives the null candidate w = 0
  Quad2DConfig quad;
};

// anchor: verify.check_dynkin
/// w(x) against E[e^{-r tau} w(X_tau)] + E[int_0^tau e^{-rt} s(X_t) dt] for the
/// candidate value w of `set` and s = sigma 1_S its representing density;
/// tau is the first monitoring time at which X is outside `box`. The identity
/// holds for any stopping time, so the discrete exit causes no bias; the time
/// integral uses the trapezoid rule on the monitoring grid. In 2D, w at exit
/// points is interpolated from a table in log-coordinates.
inline IdentityReport check_dynkin(const CandidateSet& set, std::span<const double> x, const Box& box,
                                   const GbmParams& params, const McConfig& mc = {},
                                   const DynkinOptions& opt = {}) {
  params.validate();
  const int d = params.dim();
  detail::require(static_cast<int>(x.size()) == d, "check_dynkin: start has wrong dimension");
  detail::require(box.dim() == d && static_cast<int>(box.hi.size()) == d, "check_dynkin: box has wrong dimension");
  detail::require(box.contains(x), "check_dynkin: box must contain the start point");
  detail::require(mc.dt > 0.0, "check_dynkin: dt must be positive");
  set.validate(params.K);
  const RepresentingDensity sigma(params, opt.sigma_scale);

  IdentityReport rep;
  rep.k_se = mc.k_se;
  rep.seed = mc.seed;
  rep.paths = mc.paths;

  auto simulate = [&](auto&& w, auto&& s) {
    GbmStepper proto(params);
    return detail::run_paths(mc, 3, [&](CounterRng& rng) {
      thread_local std::vector<double> y;
      y.assign(x.begin(), x.end());
      GbmStepper st = proto;
      std::normal_distribution<double> normal;
      double t = 0.0;
      double integral = 0.0;
      double prev = s(y);
      while (box.strictly_contains(y)) {
        st.step(y, mc.dt, rng, normal);
        t += mc.dt;
        const double cur = std::exp(-params.r * t) * s(y);
        integral += 0.5 * mc.dt * (prev + cur);
        prev = cur;
      }
      return std::exp(-params.r * t) * w(y) + integral;
    });
  };

  if (set.kind == CandidateSet::Kind::Threshold) {
    detail::require(d == 1, "check_dynkin: threshold sets are one-dimensional");
    auto w = [&](std::span<const double> y) { return candidate_value_1d(set.threshold, y[0], params, opt.sigma_scale); };
    auto s = [&](std::span<const double> y) { return y[0] <= set.threshold ? sigma(y) : 0.0; };
    rep.lhs = w(x);
    const auto m = simulate(w, s);
    rep.rhs = m.mean();
    rep.rhs_se = m.se();
  } else if (set.kind == CandidateSet::Kind::Ellipsoid) {
    detail::require(d == 2, "check_dynkin: ellipsoid sets are two-dimensional");
    auto exact = [&](double y1, double y2) {
      const std::array<double, 2> y{y1, y2};
      return candidate_value_2d(set, y, params, opt.quad, opt.sigma_scale).value;
    };
    rep.lhs = exact(x[0], x[1]);
    // one monitoring step overshoots by a few a_i sqrt(dt) in log-price
    const double amax = std::max(std::abs(params.a[0]), std::abs(params.a[1]));
    const auto table = detail::tabulate(box, 6.0 * amax * std::sqrt(mc.dt) + 1e-3, opt.grid, exact);
    auto w = [&](std::span<const double> y) { return table(y[0], y[1]); };
    auto s = [&](std::span<const double> y) { return set.ellipse.contains(y[0], y[1]) ? sigma(y) : 0.0; };
    const auto m = simulate(w, s);
    rep.rhs = m.mean();
    rep.rhs_se = m.se();
  } else {
    throw domain_error("check_dynkin: time-dependent sets go through check_spacetime_dynkin");
  }
  rep.decide();
  return rep;
}

/// Stopping rule for policy_value_mc.
using StoppingRule = std::variant<CandidateSet, amput::ExerciseBoundary>;

namespace detail {

/// Log-distance, in units of one-step standard deviations, below which the
/// monitoring step is not enlarged.
inline constexpr double kSafeSteps = 8.0;

inline double reward(std::span<const double> y, double K) {
  double s = K;
  for (double v : y) s -= v;
  return std::max(s, 0.0);
}

}  // namespace detail

// anchor: verify.policy_value_mc
/// E_x[e^{-r tau} g(X_tau)] for the first monitoring time tau at which X is in
/// the stopping set. Perpetual rules run to a horizon T_max with
/// e^{-r T_max} K below a tenth of target_se; far from the set the monitoring
/// step grows while the log-distance to the set stays above 8 step standard
/// deviations (steps that could cross are never coarsened). For an exercise
/// boundary the horizon is T and the reward at T is (K - X_T)^+.
inline Estimate policy_value_mc(const StoppingRule& rule, std::span<const double> x0, const GbmParams& params,
                                const McConfig& mc = {}, double target_se = 1e-3, double s0 = 0.0) {
  params.validate();
  const int d = params.dim();
  detail::require(static_cast<int>(x0.size()) == d, "policy_value_mc: start has wrong dimension");
  detail::require(mc.dt > 0.0 && target_se > 0.0, "policy_value_mc: dt and target_se must be positive");
  Estimate out;
  out.seed = mc.seed;
  out.paths = mc.paths;
  const double K = params.K;

  if (const auto* b = std::get_if<amput::ExerciseBoundary>(&rule)) {
    detail::require(d == 1, "policy_value_mc: exercise boundaries are one-dimensional");
    detail::require(s0 >= 0.0 && s0 <= b->horizon(), "policy_value_mc: start time outside the grid");
    const double T = b->horizon();
    if (x0[0] <= b->at(s0) || s0 == T) {
      out.value = detail::reward(x0, K);
      return out;
    }
    GbmStepper proto(params);
    const auto m = detail::run_paths(mc, 4, [&](CounterRng& rng) {
      GbmStepper st = proto;
      std::normal_distribution<double> normal;
      double y = x0[0];
      double t = s0;
      while (true) {
        const double h = std::min(mc.dt, T - t);
        st.step(std::span<double>(&y, 1), h, rng, normal);
        t = (T - t - h <= 1e-12 * T) ? T : t + h;
        if (t == T || y <= b->at(t)) return std::exp(-params.r * (t - s0)) * std::max(K - y, 0.0);
      }
    });
    out.value = m.mean();
    out.se = m.se();
    return out;
  }

  const auto& set = std::get<CandidateSet>(rule);
  set.validate(K);
  if (set.contains(x0)) {
    out.value = detail::reward(x0, K);
    return out;
  }
  const double t_max = std::log(K / (0.1 * target_se)) / params.r;
  // per-coordinate levels: entering the set needs log X_i < log p_i for every i
  std::vector<double> level(d);
  if (set.kind == CandidateSet::Kind::Threshold) {
    detail::require(d == 1, "policy_value_mc: threshold sets are one-dimensional");
    level[0] = std::log(set.threshold);
  } else {
    detail::require(d == 2, "policy_value_mc: ellipsoid sets are two-dimensional");
    level[0] = std::log(set.ellipse.p1);
    level[1] = std::log(set.ellipse.p2);
  }
  std::vector<double> vol(d);
  for (int i = 0; i < d; ++i) vol[i] = std::abs(params.a[i]);
  const double dt_max = 1.0;

  GbmStepper proto(params);
  const auto m = detail::run_paths(mc, 5, [&](CounterRng& rng) {
    GbmStepper st = proto;
    std::normal_distribution<double> normal;
    thread_local std::vector<double> y;
    y.assign(x0.begin(), x0.end());
    double t = 0.0;
    while (t < t_max) {
      // largest step with every safe coordinate kSafeSteps deviations away
      double h = mc.dt;
      for (int i = 0; i < d; ++i) {
        const double gap = std::log(y[i]) - level[i];
        if (gap > 0.0) {
          const double hi = std::min(dt_max, std::pow(gap / (detail::kSafeSteps * vol[i]), 2));
          h = std::max(h, hi);
        }
      }
      h = std::min(h, t_max - t);
      st.step(y, h, rng, normal);
      t += h;
      if (set.contains(y)) return std::exp(-params.r * t) * detail::reward(y, K);
    }
    return 0.0;
  });
  out.value = m.mean();
  out.se = m.se();
  return out;
}

// anchor: verify.check_spacetime_dynkin
/// Space-time form for the American put: with w(u, x) the early-exercise
/// representation built from `b`,
///   w(u, x) = E[e^{-r(tau-u)} w(tau, X_tau)] + E[int_u^tau e^{-r(t-u)} rK 1{X_t < b(t)} dt],
/// tau the first monitoring time with X_t <= level, capped at T (w(T, .) is
/// the payoff).
inline IdentityReport check_spacetime_dynkin(const amput::ExerciseBoundary& b, double u, double x, double level,
                                             const PutParams& p, const McConfig& mc = {}) {
  p.validate();
  const double T = p.T;
  detail::require(u >= 0.0 && u < T, "check_spacetime_dynkin: need 0 <= u < T");
  detail::require(x > level && level > 0.0, "check_spacetime_dynkin: start must lie above the level");
  auto w = [&](double t, double y) {
    if (t >= T) return std::max(p.K - y, 0.0);
    return amput::eep_value(t, y, b, p).total;
  };
  IdentityReport rep;
  rep.k_se = mc.k_se;
  rep.seed = mc.seed;
  rep.paths = mc.paths;
  rep.lhs = w(u, x);
  const GbmParams g = p.gbm();
  GbmStepper proto(g);
  const auto m = detail::run_paths(mc, 6, [&](CounterRng& rng) {
    GbmStepper st = proto;
    std::normal_distribution<double> normal;
    double y = x;
    double t = u;
    auto s = [&](double tt, double yy) { return yy < b.at(tt) ? p.r * p.K : 0.0; };
    double prev = s(t, y);
    double integral = 0.0;
    while (true) {
      const double h = std::min(mc.dt, T - t);
      st.step(std::span<double>(&y, 1), h, rng, normal);
      t = (T - t - h <= 1e-12 * T) ? T : t + h;
      const double cur = std::exp(-p.r * (t - u)) * s(t, y);
      integral += 0.5 * h * (prev + cur);
      prev = cur;
      if (t == T || y <= level) return std::exp(-p.r * (t - u)) * w(t, y) + integral;
    }
  });
  rep.rhs = m.mean();
  rep.rhs_se = m.se();
  rep.decide();
  return rep;
}

}  // namespace rieszstop::verify
