#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "rieszstop/error.hpp"
#include "rieszstop/rng.hpp"

namespace rieszstop {

// anchor: model.GbmParams
/// Multi-dimensional geometric Brownian motion
///   X_t^(i) = x_i exp(a_i W_t^(i) + (mu_i - a_i^2/2) t),  E[W^(i) W^(j)] = sigma_ij t,
/// together with the discount rate r and the strike / installation cost K of
/// the stopping problem  sup_tau E[e^{-r tau} (K - sum_i X_tau^(i))^+].
struct GbmParams {
  std::vector<double> mu;
  std::vector<double> a;
  Eigen::MatrixXd corr;
  double r = 0.0;
  double K = 1.0;

  int dim() const { return static_cast<int>(mu.size()); }

  static GbmParams one_dim(double mu, double a, double r, double K) {
    GbmParams p;
    p.mu = {mu};
    p.a = {a};
    p.corr = Eigen::MatrixXd::Identity(1, 1);
    p.r = r;
    p.K = K;
    return p;
  }

  static GbmParams two_dim(double mu1, double mu2, double a1, double a2, double rho, double r,
                           double K) {
    GbmParams p;
    p.mu = {mu1, mu2};
    p.a = {a1, a2};
    p.corr = Eigen::MatrixXd::Identity(2, 2);
    p.corr(0, 1) = p.corr(1, 0) = rho;
    p.r = r;
    p.K = K;
    return p;
  }

  /// Structural invariants: matching sizes, symmetric unit-diagonal positive
  /// definite correlation, a_i != 0, r > 0, K > 0.
  void validate() const {
    const int d = dim();
    detail::require(d >= 1, "GbmParams: dimension must be at least 1");
    detail::require(static_cast<int>(a.size()) == d, "GbmParams: a and mu differ in length");
    detail::require(corr.rows() == d && corr.cols() == d, "GbmParams: corr must be d x d");
    for (int i = 0; i < d; ++i) {
      detail::require(std::isfinite(mu[i]) && std::isfinite(a[i]), "GbmParams: non-finite entry");
      detail::require(a[i] != 0.0, "GbmParams: volatilities must be nonzero");
      detail::require(std::abs(corr(i, i) - 1.0) < 1e-12, "GbmParams: corr diagonal must be 1");
      for (int j = 0; j < i; ++j)
        detail::require(std::abs(corr(i, j) - corr(j, i)) < 1e-12, "GbmParams: corr not symmetric");
    }
    detail::require(r > 0.0, "GbmParams: r must be positive");
    detail::require(K > 0.0, "GbmParams: K must be positive");
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    detail::require(llt.info() == Eigen::Success, "GbmParams: corr must be positive definite");
  }

  /// Standing assumption of the investment problem: mu_i <= r for all i.
  void require_drifts_below_rate() const {
    for (double m : mu)
      detail::require(m <= r, "GbmParams: drift exceeds the discount rate (mu_i <= r required)");
  }

  /// rho_ij = a_i a_j sigma_ij.
  Eigen::MatrixXd covariance() const {
    const int d = dim();
    Eigen::MatrixXd c(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) c(i, j) = a[i] * a[j] * corr(i, j);
    return c;
  }

  /// Log-drift nu_i = mu_i - a_i^2 / 2.
  double log_drift(int i) const { return mu[i] - 0.5 * a[i] * a[i]; }

  /// Drift of the driving Brownian motion after scaling: (mu_i - a_i^2/2) / a_i.
  Eigen::VectorXd normalized_drift() const {
    Eigen::VectorXd m(dim());
    for (int i = 0; i < dim(); ++i) m(i) = log_drift(i) / a[i];
    return m;
  }
};

/// One-dimensional put problem on [0, T] under the pricing measure (drift r).
struct PutParams {
  double K = 100.0;
  double r = 0.05;
  double vol = 0.2;
  double T = 1.0;

  void validate() const {
    detail::require(K > 0.0, "PutParams: K must be positive");
    detail::require(r > 0.0, "PutParams: r must be positive");
    detail::require(vol > 0.0, "PutParams: vol must be positive");
    detail::require(T > 0.0, "PutParams: T must be positive");
  }

  GbmParams gbm() const { return GbmParams::one_dim(r, vol, r, K); }
};

/// Outcome of eliminating the revenue factor X^(0) from a (d+1)-factor
/// investment problem. The measure change itself is not materialized; only the
/// resulting d-factor dynamics are kept.
struct ReducedProblem {
  GbmParams base;
  std::vector<double> weights;  ///< alpha, absorbed into the start point
  double revenue_drift = 0.0;   ///< mu_0, subtracted from drifts and rate
  std::string note;

  /// Start point of the reduced problem for a full start (x_0, x_1, ..., x_d):
  /// x~_i = alpha_i x_i K / x_0.
  std::vector<double> reduced_start(std::span<const double> full_start) const {
    detail::require(full_start.size() == weights.size() + 1, "reduced_start: wrong dimension");
    detail::require(full_start[0] > 0.0, "reduced_start: x_0 must be positive");
    std::vector<double> x(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i)
      x[i] = weights[i] * full_start[i + 1] * base.K / full_start[0];
    return x;
  }

  /// Full value = value_scale(x_0) * reduced value.
  double value_scale(double x0) const { return x0 / base.K; }
};

// anchor: model.reduce_problem
/// Reduces the problem  sup E[e^{-r tau}(X^(0) - sum alpha_i X^(i))^+]  on d+1
/// factors (index 0 is the revenue factor) to a d-factor problem with constant
/// revenue K. The reduced factors X^(i)/X^(0) have drift mu_i - mu_0 and squared
/// volatility a_0^2 + a_i^2 - 2 a_i a_0 sigma_0i under the revenue-numeraire
/// measure; the discount rate becomes r - mu_0. The strike of the reduced
/// problem is full.K, the start point mapping is ReducedProblem::reduced_start.
inline ReducedProblem reduce_problem(const GbmParams& full, std::span<const double> alpha) {
  const int n = full.dim();
  detail::require(n >= 2, "reduce_problem: need at least two factors");
  detail::require(static_cast<int>(alpha.size()) == n - 1, "reduce_problem: alpha has wrong length");
  for (double w : alpha) detail::require(w > 0.0, "reduce_problem: weights must be positive");
  detail::require(std::isfinite(full.r) && full.r > full.mu[0],
                  "reduce_problem: r must exceed the revenue drift mu_0 (value may be infinite)");
  // validate everything except r > 0, which is replaced by r > mu_0
  {
    GbmParams probe = full;
    probe.r = 1.0;
    if (full.a[0] == 0.0) probe.a[0] = 1.0;  // constant revenue factor is allowed
    probe.validate();
  }

  const int d = n - 1;
  const Eigen::MatrixXd& s = full.corr;
  const double a0 = full.a[0];
  Eigen::MatrixXd cov(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double ai = full.a[i + 1];
      const double aj = full.a[j + 1];
      cov(i, j) = ai * aj * s(i + 1, j + 1) - ai * a0 * s(i + 1, 0) - aj * a0 * s(j + 1, 0) + a0 * a0;
    }

  ReducedProblem out;
  out.base.mu.resize(d);
  out.base.a.resize(d);
  out.base.corr = Eigen::MatrixXd::Identity(d, d);
  for (int i = 0; i < d; ++i) {
    detail::require(cov(i, i) > 0.0, "reduce_problem: reduced factor has zero volatility");
    out.base.mu[i] = full.mu[i + 1] - full.mu[0];
    out.base.a[i] = std::sqrt(cov(i, i));
  }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) out.base.corr(i, j) = cov(i, j) / (out.base.a[i] * out.base.a[j]);
  out.base.r = full.r - full.mu[0];
  out.base.K = full.K;
  out.weights.assign(alpha.begin(), alpha.end());
  out.revenue_drift = full.mu[0];
  out.note = "ratios X^(i)/X^(0) under the revenue-numeraire measure";
  out.base.validate();
  return out;
}

/// Density h of the duality measure m with respect to Lebesgue measure:
///   h(y) = exp(-sum_i log y_i + 2 mbar Sigma^{-1} (log y_i / a_i)_i),
/// mbar_i = (mu_i - a_i^2/2)/a_i. Equivalently the exponent is
/// 2 nu R^{-1} log(y) with the covariance R; in d = 1 this is y^{2 mu/a^2 - 2}.
struct DualDensity {
  explicit DualDensity(const GbmParams& p) : coeff_(p.dim()) {
    p.validate();
    const Eigen::VectorXd mbar = p.normalized_drift();
    const Eigen::VectorXd w = p.corr.llt().solve(mbar);
    for (int i = 0; i < p.dim(); ++i) coeff_(i) = 2.0 * w(i) / p.a[i] - 1.0;
  }

  double log_value(std::span<const double> y) const {
    detail::require(static_cast<int>(y.size()) == coeff_.size(), "dual_density: wrong dimension");
    double s = 0.0;
    for (int i = 0; i < coeff_.size(); ++i) {
      detail::require(y[i] > 0.0, "dual_density: coordinates must be positive");
      s += coeff_(i) * std::log(y[i]);
    }
    return s;
  }

  double operator()(std::span<const double> y) const { return std::exp(log_value(y)); }

  /// h(y) = prod_i y_i^{exponent(i)}.
  double exponent(int i) const { return coeff_(i); }

private:
  Eigen::VectorXd coeff_;
};

// anchor: model.dual_density
inline double dual_density(std::span<const double> y, const GbmParams& params) {
  return DualDensity(params)(y);
}

// anchor: model.transition_density
/// Lebesgue density of X_t at `y` given X_0 = `x`, for d = 1 (lognormal) and
/// d = 2 (drifted correlated Gaussian in log-coordinates).
inline double transition_density(double t, std::span<const double> x, std::span<const double> y,
                                 const GbmParams& params) {
  const int d = params.dim();
  detail::require(t > 0.0, "transition_density: t must be positive");
  detail::require(static_cast<int>(x.size()) == d && static_cast<int>(y.size()) == d,
                  "transition_density: dimension mismatch");
  for (int i = 0; i < d; ++i)
    detail::require(x[i] > 0.0 && y[i] > 0.0, "transition_density: coordinates must be positive");

  if (d == 1) {
    const double s = std::abs(params.a[0]) * std::sqrt(t);
    const double z = (std::log(y[0] / x[0]) - params.log_drift(0) * t) / s;
    return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * s * y[0]);
  }
  if (d == 2) {
    const double rho = params.corr(0, 1);
    const double a1 = params.a[0], a2 = params.a[1];
    const double m1 = params.log_drift(0) / a1, m2 = params.log_drift(1) / a2;
    const double u = std::log(y[0] / x[0]) / a1 - m1 * t;
    const double v = std::log(y[1] / x[1]) / a2 - m2 * t;
    const double om = 1.0 - rho * rho;
    const double b = u * u - 2.0 * rho * u * v + v * v;
    const double fz = std::exp(-b / (2.0 * t * om)) / (2.0 * std::numbers::pi * t * std::sqrt(om));
    return fz / std::abs(a1 * a2 * y[0] * y[1]);
  }
  throw domain_error("transition_density: only d = 1 and d = 2 are supported");
}

/// Exact one-step propagation of log-prices: log X_{t+dt} = log X_t + nu dt + sqrt(dt) a (L z).
class GbmStepper {
public:
  explicit GbmStepper(const GbmParams& p) : params_(p) {
    p.validate();
    Eigen::LLT<Eigen::MatrixXd> llt(p.corr);
    if (llt.info() != Eigen::Success) throw domain_error("GbmStepper: corr is not positive definite");
    chol_ = llt.matrixL();
    z_.resize(p.dim());
  }

  int dim() const { return params_.dim(); }
  const GbmParams& params() const { return params_; }

  /// Advances `x` (prices) by dt in place.
  template <class Rng>
  void step(std::span<double> x, double dt, Rng& rng, std::normal_distribution<double>& normal) {
    const int d = dim();
    const double sq = std::sqrt(dt);
    for (int i = 0; i < d; ++i) z_(i) = normal(rng);
    for (int i = 0; i < d; ++i) {
      double w = 0.0;
      for (int j = 0; j <= i; ++j) w += chol_(i, j) * z_(j);
      x[i] *= std::exp(params_.log_drift(i) * dt + params_.a[i] * sq * w);
    }
  }

private:
  GbmParams params_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd z_;
};

/// Simulated prices at grid times; layout [path][time][component].
struct PathArray {
  int paths = 0;
  int dim = 0;
  std::vector<double> times;
  std::vector<double> values;

  double at(int path, int k, int i) const {
    return values[(static_cast<std::size_t>(path) * times.size() + k) * dim + i];
  }

  /// CSV with columns path_id, t, x_1..x_d.
  void write_csv(std::ostream& os) const {
    os << "path_id,t";
    for (int i = 0; i < dim; ++i) os << ",x_" << (i + 1);
    os << '\n';
    char buf[32];
    for (int p = 0; p < paths; ++p)
      for (std::size_t k = 0; k < times.size(); ++k) {
        os << p;
        std::snprintf(buf, sizeof buf, ",%.17g", times[k]);
        os << buf;
        for (int i = 0; i < dim; ++i) {
          std::snprintf(buf, sizeof buf, ",%.17g", at(p, static_cast<int>(k), i));
          os << buf;
        }
        os << '\n';
      }
  }
};

/// Exact simulation of `n` paths at the grid times. Path p draws from stream p
/// of the seed, so any path is reproducible on its own.
inline PathArray sample_paths(const GbmParams& params, std::span<const double> x0,
                              std::span<const double> grid, int n, std::uint64_t seed) {
  detail::require(n >= 1, "sample_paths: need at least one path");
  detail::require(static_cast<int>(x0.size()) == params.dim(), "sample_paths: start has wrong dimension");
  for (double v : x0) detail::require(v > 0.0, "sample_paths: start must be positive");
  std::vector<double> times(grid.begin(), grid.end());
  if (times.empty()) times.push_back(0.0);
  detail::require(times.front() == 0.0, "sample_paths: grid must start at 0");
  for (std::size_t k = 1; k < times.size(); ++k)
    detail::require(times[k] > times[k - 1], "sample_paths: grid must be strictly increasing");

  GbmStepper stepper(params);
  const int d = params.dim();
  PathArray out;
  out.paths = n;
  out.dim = d;
  out.times = times;
  out.values.resize(static_cast<std::size_t>(n) * times.size() * d);
  const CounterRng root(seed);
  std::vector<double> x(d);
  for (int p = 0; p < n; ++p) {
    CounterRng rng = root.split(static_cast<std::uint64_t>(p));
    std::normal_distribution<double> normal;
    x.assign(x0.begin(), x0.end());
    double* row = &out.values[static_cast<std::size_t>(p) * times.size() * d];
    for (int i = 0; i < d; ++i) row[i] = x[i];
    for (std::size_t k = 1; k < times.size(); ++k) {
      stepper.step(x, times[k] - times[k - 1], rng, normal);
      for (int i = 0; i < d; ++i) row[k * d + i] = x[i];
    }
  }
  return out;
}

}  // namespace rieszstop
