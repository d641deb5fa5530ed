#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

#include "rieszstop/error.hpp"
#include "rieszstop/model.hpp"
#include "rieszstop/special.hpp"

namespace rieszstop::kernels {

// anchor: kernels.Kernel1D
/// Green kernel of one-dimensional GBM killed at rate r, with respect to the
/// speed measure m(dy) = (2/a^2) y^{2 mu/a^2 - 2} dy:
///   G(x, y) = min(x,y)^beta max(x,y)^{-theta} / (theta + beta),
/// where -theta < 0 < beta are the roots of a^2/2 k(k-1) + mu k - r = 0.
/// For mu = r this is beta = 1, theta = gamma = 2r/a^2.
struct Kernel1D {
  double gamma = 0.0;  ///< 2r/a^2
  double a = 0.0;
  double r = 0.0;
  double mu = 0.0;
  double theta = 0.0;  ///< decay exponent of the decreasing solution
  double beta = 0.0;   ///< growth exponent of the increasing solution

  static Kernel1D from_params(const GbmParams& p) {
    detail::require(p.dim() == 1, "Kernel1D: one-dimensional parameters required");
    p.validate();
    return make(p.mu[0], p.a[0], p.r);
  }

  /// Kernel with mu = r, the case with closed form min * max^{-gamma} / (1 + gamma).
  static Kernel1D with_gamma(double gamma, double a = 1.0) {
    detail::require(gamma > 0.0, "Kernel1D: gamma must be positive");
    const double r = 0.5 * gamma * a * a;
    return make(r, a, r);
  }

  static Kernel1D make(double mu, double a, double r) {
    detail::require(a != 0.0 && r > 0.0, "Kernel1D: need a != 0 and r > 0");
    Kernel1D k;
    k.a = std::abs(a);
    k.r = r;
    k.mu = mu;
    const double s2 = a * a;
    k.gamma = 2.0 * r / s2;
    const double b = 0.5 * s2 - mu;
    const double root = std::sqrt(b * b + 2.0 * s2 * r);
    if (mu == r) {
      k.beta = 1.0;
      k.theta = k.gamma;
    } else {
      // stable forms for both roots
      k.beta = b > 0.0 ? (b + root) / s2 : 2.0 * r / (root - b);
      k.theta = b > 0.0 ? 2.0 * r / (b + root) : (root - b) / s2;
    }
    return k;
  }

  /// Exponent of the speed density: m(dy) = (2/a^2) y^{speed_exponent} dy.
  double speed_exponent() const { return 2.0 * mu / (a * a) - 2.0; }

  double speed_density(double y) const { return 2.0 / (a * a) * std::pow(y, speed_exponent()); }
};

// anchor: kernels.green_1d
inline double green_1d(double x, double y, const Kernel1D& k) {
  detail::require(x > 0.0 && y > 0.0, "green_1d: arguments must be positive");
  const double lo = std::min(x, y);
  const double hi = std::max(x, y);
  return std::pow(lo, k.beta) * std::pow(hi, -k.theta) / (k.theta + k.beta);
}

// anchor: kernels.b_rho
/// B_rho(x, y) = x^2 - 2 rho x y + y^2.
inline double b_rho(double x, double y, double rho) { return x * x - 2.0 * rho * x * y + y * y; }

// anchor: kernels.a_rho
/// A_rho(x, y; m1, m2) = 2 rho (m2 x + m1 y) - 2 (m1 x + m2 y).
inline double a_rho(double x, double y, double m1, double m2, double rho) {
  return 2.0 * rho * (m2 * x + m1 * y) - 2.0 * (m1 * x + m2 * y);
}

// anchor: kernels.Kernel2D
/// Constants of the two-dimensional resolvent. Volatilities are stored
/// positive; a negative a_i is absorbed by flipping the sign of W^(i), which
/// flips rho and m_i.
struct Kernel2D {
  double rho = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  double r = 0.0;
  double r_hat = 0.0;  ///< r + B_rho(m1, m2) / (2 (1 - rho^2))

  static Kernel2D from_params(const GbmParams& p) {
    detail::require(p.dim() == 2, "Kernel2D: two-dimensional parameters required");
    p.validate();
    Kernel2D k;
    const double s1 = p.a[0] < 0.0 ? -1.0 : 1.0;
    const double s2 = p.a[1] < 0.0 ? -1.0 : 1.0;
    k.rho = s1 * s2 * p.corr(0, 1);
    detail::require(std::abs(k.rho) < 1.0, "Kernel2D: |rho| must be below 1");
    k.a1 = std::abs(p.a[0]);
    k.a2 = std::abs(p.a[1]);
    k.m1 = p.log_drift(0) / k.a1;
    k.m2 = p.log_drift(1) / k.a2;
    k.r = p.r;
    k.r_hat = p.r + b_rho(k.m1, k.m2, k.rho) / (2.0 * (1.0 - k.rho * k.rho));
    return k;
  }

  double omega() const { return 1.0 - rho * rho; }

  /// Resolvent density in normalized log-coordinates z_i = log(y_i/x_i)/a_i,
  /// i.e. the discounted occupation density of the drifted correlated
  /// Brownian motion (W1 + m1 t, W2 + m2 t) at displacement z.
  double log_density(double z1, double z2) const {
    const double om = omega();
    const double b = b_rho(z1, z2, rho);
    if (!(b > 0.0)) throw singularity_error("resolvent_2d: evaluation at the start point");
    const double arg = std::sqrt(r_hat) * std::sqrt(2.0 * b / om);
    const double expo = -a_rho(z1, z2, m1, m2, rho) / (2.0 * om) - arg;
    return std::exp(expo) * special::bessel_k0_scaled(arg) / (std::numbers::pi * std::sqrt(om));
  }

  /// Exponential decay rate of log_density along the unit direction
  /// (cos t, sin t); strictly positive because r > 0.
  double decay_rate(double c, double s) const {
    const double om = omega();
    return std::sqrt(2.0 * r_hat * b_rho(c, s, rho) / om) + a_rho(c, s, m1, m2, rho) / (2.0 * om);
  }
};

// anchor: kernels.resolvent_2d
/// Density at `point` = (u, v), with respect to Lebesgue measure, of the
/// r-discounted occupation measure of X started at `start`:
///   exp(-A_rho(u^, v^)/(2(1-rho^2))) K0(sqrt(r^) sqrt(2 B_rho(u^, v^)/(1-rho^2)))
///     / (pi sqrt(1-rho^2) a1 a2 u v),     u^ = log(u/x1)/a1, v^ = log(v/x2)/a2.
inline double resolvent_2d(std::span<const double> start, std::span<const double> point,
                           const Kernel2D& k) {
  detail::require(start.size() == 2 && point.size() == 2, "resolvent_2d: points must be 2D");
  detail::require(start[0] > 0.0 && start[1] > 0.0 && point[0] > 0.0 && point[1] > 0.0,
                  "resolvent_2d: coordinates must be positive");
  const double z1 = std::log(point[0] / start[0]) / k.a1;
  const double z2 = std::log(point[1] / start[1]) / k.a2;
  return k.log_density(z1, z2) / (k.a1 * k.a2 * point[0] * point[1]);
}

inline double resolvent_2d(const std::array<double, 2>& start, const std::array<double, 2>& point,
                           const Kernel2D& k) {
  return resolvent_2d(std::span<const double>(start), std::span<const double>(point), k);
}

// anchor: kernels.SpaceTimeKernel
/// Space-time Green kernel of (t, X_t) on [0, T] for one-dimensional GBM with
/// drift mu, taken with respect to dt m(dy), m the speed measure of Kernel1D.
struct SpaceTimeKernel {
  double r = 0.0;
  double a = 0.0;
  double mu = 0.0;
  double T = 0.0;

  static SpaceTimeKernel from_put(const PutParams& p) {
    p.validate();
    return {p.r, p.vol, p.r, p.T};
  }

  double speed_density(double y) const {
    return 2.0 / (a * a) * std::pow(y, 2.0 * mu / (a * a) - 2.0);
  }
};

// anchor: kernels.spacetime_kernel
/// e^{-r(t-s)} p(t-s; x, y) for s < t <= T, p the transition density with
/// respect to the speed measure; 0 for t <= s away from the diagonal. The
/// diagonal t = s, x = y is infinite and raises singularity_error.
inline double spacetime_kernel(double s, double x, double t, double y, const SpaceTimeKernel& k) {
  detail::require(x > 0.0 && y > 0.0, "spacetime_kernel: prices must be positive");
  detail::require(s >= 0.0 && s < k.T, "spacetime_kernel: need 0 <= s < T");
  detail::require(t <= k.T, "spacetime_kernel: t exceeds the horizon");
  if (t == s && x == y) throw singularity_error("spacetime_kernel: infinite on the diagonal t = s, x = y");
  if (t <= s) return 0.0;
  const double tau = t - s;
  const double sd = k.a * std::sqrt(tau);
  const double z = (std::log(y / x) - (k.mu - 0.5 * k.a * k.a) * tau) / sd;
  const double lebesgue = std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * sd * y);
  return std::exp(-k.r * tau) * lebesgue / k.speed_density(y);
}

}  // namespace rieszstop::kernels
