#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "rieszstop/error.hpp"

namespace rieszstop::special {

/// Method thresholds for K0. The power series is used up to `series_cutoff`;
/// above it the Steed/Temme continued fraction for K_nu at nu = 0 converges
/// quickly. Both branches reach ~1e-15 relative accuracy.
struct K0Evaluator {
  double series_cutoff = 2.0;
  double tolerance = 1e-16;
  int max_terms = 500;

  /// e^u K0(u). Finite for all u > 0, so callers can combine exponents
  /// without underflow.
  double scaled(double u) const {
    if (!(u > 0.0)) throw domain_error("bessel_k0: argument must be positive");
    if (u <= series_cutoff) return std::exp(u) * series(u);
    return continued_fraction_scaled(u);
  }

  double operator()(double u) const {
    if (!(u > 0.0)) throw domain_error("bessel_k0: argument must be positive");
    if (u <= series_cutoff) return series(u);
    return std::exp(-u) * continued_fraction_scaled(u);
  }

private:
  // K0(u) = -(ln(u/2) + euler_gamma) I0(u) + sum_{k>=1} H_k (u^2/4)^k / (k!)^2
  double series(double u) const {
    const double q = 0.25 * u * u;
    double term = 1.0;
    double i0 = 1.0;
    double harmonic = 0.0;
    double tail = 0.0;
    for (int k = 1; k < max_terms; ++k) {
      term *= q / (static_cast<double>(k) * k);
      harmonic += 1.0 / k;
      i0 += term;
      tail += harmonic * term;
      if (term < tolerance * i0) break;
    }
    return -(std::log(0.5 * u) + std::numbers::egamma) * i0 + tail;
  }

  // Steed's method for the second continued fraction (Temme 1975).
  double continued_fraction_scaled(double u) const {
    double b = 2.0 * (1.0 + u);
    double d = 1.0 / b;
    double delh = d;
    double h = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 1; i < max_terms; ++i) {
      a -= 2.0 * i;
      c = -a * c / (i + 1.0);
      const double qnew = (q1 - b * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += c * qnew;
      b += 2.0;
      d = 1.0 / (b + a * d);
      delh = (b * d - 1.0) * delh;
      h += delh;
      const double dels = q * delh;
      s += dels;
      if (std::abs(dels / s) < tolerance) break;
    }
    return std::sqrt(std::numbers::pi / (2.0 * u)) / s;
  }
};

// anchor: special.bessel_k0
/// Modified Bessel function of the second kind, order zero. Throws
/// domain_error for u <= 0 (logarithmic singularity at the origin).
inline double bessel_k0(double u) { return K0Evaluator{}(u); }

/// e^u K0(u).
inline double bessel_k0_scaled(double u) { return K0Evaluator{}.scaled(u); }

/// Standard normal CDF.
inline double norm_cdf(double z) {
  if (std::isnan(z)) throw domain_error("norm_cdf: NaN argument");
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

inline double norm_pdf(double z) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599343818684759;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

}  // namespace rieszstop::special
