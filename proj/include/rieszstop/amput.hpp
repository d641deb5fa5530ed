#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rieszstop/error.hpp"
#include "rieszstop/model.hpp"
#include "rieszstop/parallel.hpp"
#include "rieszstop/quadrature.hpp"
#include "rieszstop/riesz.hpp"
#include "rieszstop/special.hpp"

namespace rieszstop::amput {

// anchor: amput.european_put
/// Black-Scholes put at time s with spot x under drift r.
inline double european_put(double s, double x, const PutParams& p) {
  p.validate();
  detail::require(s >= 0.0 && s <= p.T, "european_put: s outside [0, T]");
  detail::require(x > 0.0, "european_put: x must be positive");
  const double tau = p.T - s;
  if (tau == 0.0) return std::max(p.K - x, 0.0);
  const double sd = p.vol * std::sqrt(tau);
  const double d1 = (std::log(x / p.K) + (p.r + 0.5 * p.vol * p.vol) * tau) / sd;
  const double d2 = d1 - sd;
  return p.K * std::exp(-p.r * tau) * special::norm_cdf(-d2) - x * special::norm_cdf(-d1);
}

// anchor: amput.crossing_prob
/// P_{s,x}(X_t < level) under drift r.
inline double crossing_prob(double s, double x, double t, double level, const PutParams& p) {
  detail::require(t > s, "crossing_prob: need t > s");
  detail::require(x > 0.0 && level > 0.0, "crossing_prob: prices must be positive");
  const double tau = t - s;
  return special::norm_cdf((std::log(level / x) - (p.r - 0.5 * p.vol * p.vol) * tau) /
                           (p.vol * std::sqrt(tau)));
}

// anchor: amput.ExerciseBoundary
/// Exercise boundary on a time grid: exercise is optimal at (t, x) iff
/// x <= b(t). Between grid points the boundary is linear.
struct ExerciseBoundary : TimeCurve {
  CandidateSet as_candidate() const { return CandidateSet::make_curve(*this); }
};

/// Rule for the time integral of the premium on each grid cell.
enum class TimeRule {
  Trapezoid,  ///< endpoint values, with the limit 1/2 at the start of the first cell
  GaussSqrt,  ///< Gauss-Legendre in w = sqrt(t - s) per cell
};

enum class Clustering { Uniform, Sqrt };

/// Defaults are a uniform grid with the trapezoid rule. Sqrt clustering with
/// GaussSqrt is the more accurate combination (no first-cell bias, and nodes
/// concentrate near T where b has infinite slope).
struct GridConfig {
  int steps = 200;
  Clustering clustering = Clustering::Uniform;
  TimeRule rule = TimeRule::Trapezoid;
  double tol = 1e-10;  ///< absolute tolerance on b(t_i) relative to K
};

inline std::vector<double> make_grid(double T, const GridConfig& g) {
  detail::require(g.steps >= 1, "make_grid: need at least one step");
  std::vector<double> t(g.steps + 1);
  for (int i = 0; i <= g.steps; ++i) {
    const double u = static_cast<double>(i) / g.steps;
    t[i] = g.clustering == Clustering::Uniform ? T * u : T * (1.0 - (1.0 - u) * (1.0 - u));
  }
  t.front() = 0.0;
  t.back() = T;
  return t;
}

namespace detail {

/// rK int_s^T e^{-r(t-s)} P_{s,x}(X_t < b(t)) dt with b linear between the
/// nodes (t_j, b_j). `s` lies in [t_{first-1}, t_first); `b_at_s` is b(s),
/// used only for the trapezoid limit at t = s.
inline double premium(double s, double x, double b_at_s, const std::vector<double>& t,
                      const std::vector<double>& b, std::size_t first, const PutParams& p, TimeRule rule) {
  const double nu = p.r - 0.5 * p.vol * p.vol;
  auto prob = [&](double tt, double level) {
    const double tau = tt - s;
    return special::norm_cdf((std::log(level / x) - nu * tau) / (p.vol * std::sqrt(tau)));
  };
  double acc = 0.0;
  double lo_t = s;
  double lo_b = b_at_s;
  for (std::size_t j = first; j < t.size(); ++j) {
    const double hi_t = t[j];
    const double hi_b = b[j];
    if (hi_t <= lo_t) {
      lo_b = hi_b;
      continue;
    }
    if (rule == TimeRule::Trapezoid) {
      double f_lo;
      if (lo_t == s)
        f_lo = x < lo_b ? 1.0 : (x > lo_b ? 0.0 : 0.5);
      else
        f_lo = std::exp(-p.r * (lo_t - s)) * prob(lo_t, lo_b);
      const double f_hi = std::exp(-p.r * (hi_t - s)) * prob(hi_t, hi_b);
      acc += 0.5 * (hi_t - lo_t) * (f_lo + f_hi);
    } else {
      const double w0 = std::sqrt(lo_t - s);
      const double w1 = std::sqrt(hi_t - s);
      const double slope = (hi_b - lo_b) / (hi_t - lo_t);
      auto f = [&](double w) {
        const double tt = s + w * w;
        const double level = lo_b + slope * (tt - lo_t);
        return 2.0 * w * std::exp(-p.r * w * w) * prob(tt, level);
      };
      acc += quad::gauss<10>(f, w0, w1);
    }
    lo_t = hi_t;
    lo_b = hi_b;
  }
  return p.r * p.K * acc;
}

}  // namespace detail

/// K - b_i - european(t_i, b_i) - premium(t_i, b_i): the defect of the
/// boundary equation at grid node i.
inline double boundary_residual(const ExerciseBoundary& b, std::size_t i, const PutParams& p,
                                TimeRule rule = TimeRule::GaussSqrt) {
  rieszstop::detail::require(i + 1 < b.t.size(), "boundary_residual: node must precede T");
  const double bi = b.b[i];
  return p.K - bi - european_put(b.t[i], bi, p) - detail::premium(b.t[i], bi, bi, b.t, b.b, i + 1, p, rule);
}

// anchor: amput.solve_boundary
/// Backward induction on the boundary equation
///   K - b(t_i) = rK int_{t_i}^T e^{-r(t-t_i)} P_{t_i,b(t_i)}(X_t < b(t)) dt + european(t_i, b(t_i)),
/// starting from b(T) = K. Each node is a bracketed scalar solve in (0, K)
/// using the nodes already found to the right.
inline ExerciseBoundary solve_boundary(const PutParams& p, const GridConfig& g = {}) {
  p.validate();
  rieszstop::detail::require(g.steps >= 50, "solve_boundary: need at least 50 time steps");
  ExerciseBoundary out;
  out.t = make_grid(p.T, g);
  out.b.assign(out.t.size(), p.K);
  const int N = g.steps;
  for (int i = N - 1; i >= 0; --i) {
    auto F = [&](double bi) {
      out.b[i] = bi;
      return p.K - bi - european_put(out.t[i], bi, p) -
             detail::premium(out.t[i], bi, bi, out.t, out.b, i + 1, p, g.rule);
    };
    // Below the boundary the defect is flat (value equals reward there), so
    // the bracket is grown downward from b_{i+1} in doubling steps and the
    // root sought is the upper edge of that flat part.
    const double hi = out.b[i + 1];
    double step = 1e-4 * p.K;
    double lo = hi - step;
    while (!(F(lo) > 0.0)) {
      step *= 2.0;
      if (step >= hi) throw solver_error("solve_boundary: could not bracket the boundary in (0, K)", lo);
      lo = hi - step;
    }
    double fhi = F(hi);
    if (fhi > 0.0) {
      // the boundary cannot decrease backwards in time; F > 0 at b_{i+1} means
      // the node sits at b_{i+1} within discretization error
      out.b[i] = hi;
      continue;
    }
    out.b[i] = quad::bracket_root(F, lo, hi, g.tol * p.K, "solve_boundary");
  }
  out.b.back() = p.K;
  return out;
}

// anchor: amput.EepDecomposition
struct EepDecomposition {
  double premium = 0.0;
  double european = 0.0;
  double total = 0.0;
};

// anchor: amput.eep_value
/// Early-exercise-premium representation of the put value at (s, x) for a
/// given boundary: rK int e^{-r(t-s)} P(X_t < b(t)) dt + european(s, x).
inline EepDecomposition eep_value(double s, double x, const ExerciseBoundary& b, const PutParams& p,
                                  TimeRule rule = TimeRule::GaussSqrt) {
  p.validate();
  rieszstop::detail::require(s >= 0.0 && s < p.T, "eep_value: need 0 <= s < T");
  rieszstop::detail::require(x > 0.0, "eep_value: x must be positive");
  rieszstop::detail::require(!b.t.empty() && b.t.front() <= s && std::abs(b.t.back() - p.T) <= 1e-12 * p.T,
                             "eep_value: boundary grid does not cover [s, T]");
  const std::size_t first = static_cast<std::size_t>(std::upper_bound(b.t.begin(), b.t.end(), s) - b.t.begin());
  EepDecomposition e;
  e.premium = detail::premium(s, x, b.at(s), b.t, b.b, first, p, rule);
  e.european = european_put(s, x, p);
  e.total = e.premium + e.european;
  return e;
}

// anchor: amput.in_exercise_region
inline bool in_exercise_region(double s, double x, const ExerciseBoundary& b) { return x <= b.at(s); }

struct ShapeReport {
  bool terminal_at_strike = false;
  bool nondecreasing = false;
  bool below_strike = false;
  double min_second_difference = 0.0;  ///< most negative scaled second difference
  bool convex = false;
};

// anchor: amput.check_boundary_shape
/// Terminal value K, monotonicity, b < K before T, and discrete convexity
/// (divided second differences >= -convex_tol) on the interior nodes.
inline ShapeReport check_boundary_shape(const ExerciseBoundary& b, double K, double convex_tol = 1e-6) {
  ShapeReport r;
  const std::size_t n = b.b.size();
  r.terminal_at_strike = n > 0 && b.b.back() == K;
  r.nondecreasing = true;
  r.below_strike = true;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (b.b[i + 1] < b.b[i]) r.nondecreasing = false;
    if (!(b.b[i] < K)) r.below_strike = false;
  }
  r.min_second_difference = 0.0;
  for (std::size_t i = 1; i + 2 < n; ++i) {
    const double dl = (b.b[i] - b.b[i - 1]) / (b.t[i] - b.t[i - 1]);
    const double dr = (b.b[i + 1] - b.b[i]) / (b.t[i + 1] - b.t[i]);
    const double dd = (dr - dl) / (0.5 * (b.t[i + 1] - b.t[i - 1])) / K;
    r.min_second_difference = std::min(r.min_second_difference, dd);
  }
  r.convex = r.min_second_difference >= -convex_tol;
  return r;
}

struct GateReport {
  std::vector<std::size_t> nodes;
  double solved_max = 0.0;
  std::vector<double> shifts;
  std::vector<double> shifted_max;
  double min_factor = 0.0;
  bool pass = false;
};

/// Boundary-equation residuals of the solved curve against curves shifted by
/// shift * K (terminal value kept at K), at `points` interior nodes. The gate
/// passes when every shifted residual exceeds the solved one by `factor`.
inline GateReport boundary_uniqueness_gate(const ExerciseBoundary& b, const PutParams& p,
                                           std::vector<double> shifts = {-0.02, 0.02}, int points = 10,
                                           double factor = 5.0, TimeRule rule = TimeRule::GaussSqrt) {
  GateReport g;
  const std::size_t n = b.t.size();
  rieszstop::detail::require(n >= static_cast<std::size_t>(points) + 2, "uniqueness gate: grid too coarse");
  for (int k = 0; k < points; ++k) g.nodes.push_back(static_cast<std::size_t>(k) * (n - 2) / points);
  auto max_res = [&](const ExerciseBoundary& c) {
    double m = 0.0;
    for (auto i : g.nodes) m = std::max(m, std::abs(boundary_residual(c, i, p, rule)));
    return m;
  };
  g.solved_max = max_res(b);
  g.shifts = shifts;
  g.min_factor = std::numeric_limits<double>::infinity();
  for (double sh : shifts) {
    ExerciseBoundary c = b;
    for (std::size_t i = 0; i + 1 < n; ++i) c.b[i] = std::clamp(b.b[i] + sh * p.K, 1e-12 * p.K, p.K);
    const double m = max_res(c);
    g.shifted_max.push_back(m);
    g.min_factor = std::min(g.min_factor, g.solved_max > 0.0 ? m / g.solved_max : std::numeric_limits<double>::infinity());
  }
  g.pass = g.min_factor >= factor;
  return g;
}

struct BinomialResult {
  double value = 0.0;     ///< American put at (0, x0)
  double european = 0.0;  ///< European put on the same tree
  std::vector<double> t;  ///< layer times
  std::vector<double> b;  ///< highest exercise node per layer (0 if none)
  bool dominates_intrinsic = true;
  bool dominates_european = true;
};

/// Cox-Ross-Rubinstein tree for the American put started at x0.
inline BinomialResult binomial_oracle(const PutParams& p, int steps, double x0) {
  p.validate();
  rieszstop::detail::require(steps >= 100, "binomial_oracle: need at least 100 steps");
  rieszstop::detail::require(x0 > 0.0, "binomial_oracle: x0 must be positive");
  const double dt = p.T / steps;
  const double u = std::exp(p.vol * std::sqrt(dt));
  const double d = 1.0 / u;
  const double disc = std::exp(-p.r * dt);
  const double q = (std::exp(p.r * dt) - d) / (u - d);
  rieszstop::detail::require(q > 0.0 && q < 1.0, "binomial_oracle: step too coarse for an arbitrage-free tree");
  const double lu = std::log(u);
  auto spot = [&](int layer, int j) { return x0 * std::exp((2.0 * j - layer) * lu); };

  BinomialResult res;
  res.t.resize(steps + 1);
  res.b.assign(steps + 1, 0.0);
  std::vector<double> am(steps + 1), eu(steps + 1);
  for (int j = 0; j <= steps; ++j) {
    am[j] = eu[j] = std::max(p.K - spot(steps, j), 0.0);
    if (am[j] > 0.0) res.b[steps] = std::max(res.b[steps], spot(steps, j));
  }
  res.t[steps] = p.T;
  for (int layer = steps - 1; layer >= 0; --layer) {
    res.t[layer] = layer * dt;
    for (int j = 0; j <= layer; ++j) {
      const double cont = disc * (q * am[j + 1] + (1.0 - q) * am[j]);
      eu[j] = disc * (q * eu[j + 1] + (1.0 - q) * eu[j]);
      const double s = spot(layer, j);
      const double ex = p.K - s;
      if (ex > 0.0 && ex >= cont) {
        am[j] = ex;
        res.b[layer] = std::max(res.b[layer], s);
      } else {
        am[j] = cont;
      }
      if (am[j] < std::max(ex, 0.0)) res.dominates_intrinsic = false;
      if (am[j] < eu[j] - 1e-12 * p.K) res.dominates_european = false;
    }
  }
  res.value = am[0];
  res.european = eu[0];
  return res;
}

}  // namespace rieszstop::amput
