#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "rieszstop/amput.hpp"
#include "rieszstop/error.hpp"
#include "rieszstop/model.hpp"
#include "rieszstop/riesz.hpp"
#include "rieszstop/rng.hpp"

using namespace rieszstop;

namespace {

const GbmParams kSym = GbmParams::two_dim(0.06, 0.06, 0.3, 0.3, 0.0, 0.06, 1.0);

}  // namespace

TEST(RepresentingDensity, LinearInPrices) {
  const auto p = GbmParams::two_dim(0.04, 0.01, 0.3, 0.2, 0.2, 0.06, 2.0);
  const RepresentingDensity s(p);
  EXPECT_DOUBLE_EQ(s(0.5, 0.25), 0.06 * 2.0 - 0.02 * 0.5 - 0.05 * 0.25);
  const std::array<double, 2> y{0.5, 0.25};
  EXPECT_DOUBLE_EQ(sigma_density(y, p), s(0.5, 0.25));
  EXPECT_DOUBLE_EQ(RepresentingDensity(p, 0.0)(y), 0.0);
  EXPECT_DOUBLE_EQ(s.terminal_mass(1.5), 0.5);
  EXPECT_DOUBLE_EQ(s.terminal_mass(2.5), 0.0);
  const std::array<double, 2> bad{0.0, 1.0};
  EXPECT_THROW(sigma_density(bad, p), domain_error);
}

TEST(GeneratorDensity, EqualsSigmaForLinearReward) {
  const auto p = GbmParams::two_dim(0.04, 0.01, 0.3, 0.2, 0.2, 0.06, 2.0);
  auto g = [&](std::span<const double> y) { return p.K - y[0] - y[1]; };
  const std::array<double, 2> y{0.7, 1.1};
  EXPECT_NEAR(generator_density(g, y, p), sigma_density(y, p), 1e-9);
}

TEST(GeneratorDensity, QuadraticRewardMatchesHandDerivative) {
  const auto p = GbmParams::one_dim(0.03, 0.3, 0.06, 1.0);
  auto g = [](std::span<const double> y) { return (1.0 - y[0]) * (1.0 - y[0]); };
  const double y = 0.4;
  const double expected = 0.06 * 0.36 - 0.03 * y * (-2.0 * 0.6) - 0.5 * 0.09 * y * y * 2.0;
  const std::array<double, 1> yy{y};
  EXPECT_NEAR(generator_density(g, yy, p), expected, 1e-8);
}

TEST(SpacetimeDensity, InteriorAndTerminalParts) {
  const PutParams p{100.0, 0.05, 0.2, 1.0};
  const auto in = spacetime_density(0.5, 80.0, 85.0, p);
  EXPECT_DOUBLE_EQ(in.interior, 5.0);
  EXPECT_DOUBLE_EQ(in.terminal, 0.0);
  EXPECT_DOUBLE_EQ(spacetime_density(0.5, 90.0, 85.0, p).interior, 0.0);
  const auto term = spacetime_density(1.0, 70.0, 100.0, p);
  EXPECT_DOUBLE_EQ(term.interior, 0.0);
  EXPECT_DOUBLE_EQ(term.terminal, 30.0);
  EXPECT_DOUBLE_EQ(spacetime_density(1.0, 120.0, 100.0, p).terminal, 0.0);
}

TEST(Superellipse, GeometryHelpers) {
  const Superellipse e{0.6, 0.4, 2.0, 0.0};
  EXPECT_DOUBLE_EQ(e.gamma(0.0), 0.4);
  EXPECT_DOUBLE_EQ(e.gamma(0.6), 0.0);
  EXPECT_NEAR(e.gamma(0.3), 0.4 * std::sqrt(0.75), 1e-15);
  EXPECT_TRUE(e.contains(0.3, 0.3));
  EXPECT_FALSE(e.contains(0.5, 0.3));
  EXPECT_FALSE(e.contains(0.0, 0.1));
  EXPECT_NEAR(std::exp(e.log_gamma_of_log(std::log(0.3))), e.gamma(0.3), 1e-15);
  EXPECT_EQ(e.log_gamma_of_log(std::log(0.7)), -std::numeric_limits<double>::infinity());
  // Hoelder bound equals a brute-force maximum of x1 + gamma(x1)
  double best = 0.0;
  for (int i = 0; i <= 200000; ++i) best = std::max(best, 0.6 * i / 200000.0 + e.gamma(0.6 * i / 200000.0));
  EXPECT_NEAR(e.max_sum(), best, 1e-9);
  const Superellipse bent{0.6, 0.6, 1.15, -0.45};
  best = 0.0;
  for (int i = 0; i <= 200000; ++i) best = std::max(best, 0.6 * i / 200000.0 + bent.gamma(0.6 * i / 200000.0));
  EXPECT_NEAR(bent.max_sum(), best, 1e-9);
  EXPECT_TRUE(bent.contains(0.3, 0.3));
  EXPECT_FALSE(bent.contains(50.0, 50.0));  // far branch of the curve
}

TEST(Superellipse, ConvexityOfTheRegion) {
  EXPECT_TRUE((Superellipse{0.5, 0.5, 1.0, 0.0}.convex()));
  EXPECT_TRUE((Superellipse{0.5, 0.5, 1.0, -0.6}.convex()));
  EXPECT_FALSE((Superellipse{0.5, 0.5, 1.0, 0.6}.convex()));  // hyperbola bending inwards
  EXPECT_FALSE((Superellipse{0.5, 0.5, 0.8, 0.0}.convex()));
  EXPECT_THROW((Superellipse{0.5, 0.5, 1.0, 0.6}.validate(1.0)), domain_error);
  EXPECT_THROW((Superellipse{0.6, 0.6, 1.0, 0.0}.validate(0.5)), domain_error);
  EXPECT_NO_THROW((Superellipse{0.45, 0.45, 1.5, -0.2}.validate(1.0)));
}

TEST(CandidateSet, KindsAndValidation) {
  EXPECT_EQ(CandidateSet::make_threshold(0.5).kind_name(), "threshold");
  EXPECT_EQ(CandidateSet::make_ellipsoid(0.5, 0.5, 2.0).kind_name(), "ellipse");
  EXPECT_THROW(CandidateSet::make_threshold(1.2).validate(1.0), domain_error);
  EXPECT_THROW(CandidateSet::make_threshold(0.0).validate(1.0), domain_error);
  const std::array<double, 1> x{0.4};
  EXPECT_TRUE(CandidateSet::make_threshold(0.5).contains(x));
  TimeCurve c{{0.0, 0.5, 1.0}, {80.0, 90.0, 100.0}};
  const auto curve = CandidateSet::make_curve(c);
  EXPECT_EQ(curve.kind_name(), "curve");
  EXPECT_NO_THROW(curve.validate(100.0));
  EXPECT_THROW(curve.contains(x), domain_error);
  EXPECT_DOUBLE_EQ(c.at(0.25), 85.0);
  TimeCurve bad{{0.0, 0.5, 1.0}, {80.0, 90.0, 99.0}};
  EXPECT_THROW(CandidateSet::make_curve(bad).validate(100.0), domain_error);
}

TEST(CandidateValue1D, ClosedFormMatchesQuadrature) {
  for (double mu : {0.06, 0.03, -0.02}) {
    const auto p = GbmParams::one_dim(mu, 0.3, 0.06, 1.0);
    for (double xbar : {0.3, 0.57}) {
      for (double x : {0.05, 0.2, xbar, 0.8, 3.0}) {
        const double cf = candidate_value_1d(xbar, x, p);
        const auto q = candidate_value_1d_quadrature(xbar, x, p);
        EXPECT_NEAR(cf, q.value, 1e-10 * std::max(1.0, cf)) << mu << ' ' << xbar << ' ' << x;
      }
    }
  }
}

TEST(CandidateValue1D, PlateauAtThresholdForDriftEqualRate) {
  for (double a2 : {0.04, 0.09, 0.16}) {
    const auto p = GbmParams::one_dim(0.06, std::sqrt(a2), 0.06, 1.0);
    const double gamma = 0.12 / a2;
    for (double f : {0.25, 0.5, 0.9}) EXPECT_NEAR(candidate_value_1d(f, f, p), 1.0 / (1.0 + gamma), 1e-12);
  }
}

TEST(CandidateValue1D, ScaleIsLinear) {
  const auto p = GbmParams::one_dim(0.03, 0.3, 0.06, 1.0);
  EXPECT_NEAR(candidate_value_1d(0.5, 0.7, p, 2.5), 2.5 * candidate_value_1d(0.5, 0.7, p), 1e-15);
  EXPECT_EQ(candidate_value_1d(0.5, 0.7, p, 0.0), 0.0);
}

// anchor: riesz.zero_harmonic_part
// The candidate is a pure potential: it vanishes at infinity, so no harmonic
// term is needed to match the bounded reward.
TEST(CandidateValue, VanishesFarFromTheSet) {
  const auto p = GbmParams::one_dim(0.06, 0.3, 0.06, 1.0);
  double prev = candidate_value_1d(0.5, 1.0, p);
  for (double x = 2.0; x < 1e6; x *= 4.0) {
    const double v = candidate_value_1d(0.5, x, p);
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, 1e-7);
  const auto set = CandidateSet::make_ellipsoid(0.5, 0.5, 1.2, -0.4);
  const std::array<double, 2> near{0.6, 0.6}, mid{5.0, 5.0}, far{500.0, 500.0};
  const double vn = candidate_value_2d(set, near, kSym).value;
  const double vm = candidate_value_2d(set, mid, kSym).value;
  const double vf = candidate_value_2d(set, far, kSym).value;
  EXPECT_GT(vn, vm);
  EXPECT_GT(vm, vf);
  EXPECT_LT(vf, 1e-3 * vn);
}

TEST(CandidateValue2D, PolarAndSliceRoutesAgree) {
  Quad2DConfig slices;
  slices.method = Quad2DConfig::Method::Slices;
  const auto corr = GbmParams::two_dim(0.04, 0.02, 0.3, 0.25, 0.3, 0.06, 1.0);
  for (const auto& set : {CandidateSet::make_ellipsoid(4.0 / 7.0, 4.0 / 7.0, 2.0),
                          CandidateSet::make_ellipsoid(0.57, 0.57, 1.15, -0.47),
                          CandidateSet::make_ellipsoid(0.5, 0.35, 1.6, 0.1)}) {
    for (const auto& p : {kSym, corr}) {
      for (const std::array<double, 2>& x : {std::array<double, 2>{0.3, 0.35}, std::array<double, 2>{0.1, 0.2},
                                              std::array<double, 2>{0.7, 0.4}}) {
        const auto a = candidate_value_2d(set, x, p);
        const auto b = candidate_value_2d(set, x, p, slices);
        EXPECT_NEAR(a.value, b.value, 1e-6 * std::max(1e-2, a.value));
      }
    }
  }
}

TEST(CandidateValue2D, ExchangeSymmetry) {
  const auto set = CandidateSet::make_ellipsoid(0.56, 0.56, 1.3, -0.3);
  const std::array<double, 2> x{0.2, 0.45}, y{0.45, 0.2};
  EXPECT_NEAR(candidate_value_2d(set, x, kSym).value, candidate_value_2d(set, y, kSym).value, 1e-10);
}

// V(x) = E int_0^inf e^{-rt} sigma 1_S(X_t) dt = E[sigma 1_S(X_T)] / r with an
// independent exponential clock T, sampled exactly.
TEST(CandidateValue2D, MatchesKilledProcessSampling) {
  const auto set = CandidateSet::make_ellipsoid(0.55, 0.5, 1.4, -0.2);
  const auto p = GbmParams::two_dim(0.04, 0.02, 0.3, 0.25, 0.3, 0.06, 1.0);
  const std::array<double, 2> x0{0.45, 0.3};
  const RepresentingDensity sigma(p);
  GbmStepper st(p);
  CounterRng rng(5);
  std::normal_distribution<double> normal;
  const int n = 200000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    std::array<double, 2> y = x0;
    st.step(y, -std::log(rng.uniform()) / p.r, rng, normal);
    const double v = set.contains(y) ? sigma(y[0], y[1]) / p.r : 0.0;
    s += v;
    ss += v * v;
  }
  const double mean = s / n;
  const double se = std::sqrt((ss / n - mean * mean) / n);
  EXPECT_NEAR(candidate_value_2d(set, x0, p).value, mean, 3.0 * se);
}

TEST(CandidateValue2D, OuterLimitConventions) {
  const auto set = CandidateSet::make_ellipsoid(0.55, 0.55, 1.2, -0.4);
  const std::array<double, 2> x{0.3, 0.5};
  Quad2DConfig cap;
  cap.outer_limit = Quad2DConfig::OuterLimit::OneDimOptimum;
  cap.one_dim_optimum = 0.6;  // beyond the intercept: no effect
  EXPECT_NEAR(candidate_value_2d(set, x, kSym, cap).value, candidate_value_2d(set, x, kSym).value, 1e-12);
  cap.one_dim_optimum = 0.4;  // cuts part of the region away
  EXPECT_LT(candidate_value_2d(set, x, kSym, cap).value, candidate_value_2d(set, x, kSym).value);
  cap.one_dim_optimum = 0.0;
  EXPECT_THROW(candidate_value_2d(set, x, kSym, cap), domain_error);
}

TEST(CandidateValue2D, RejectsInvalidSets) {
  const std::array<double, 2> x{0.3, 0.5};
  EXPECT_THROW(candidate_value_2d(CandidateSet::make_ellipsoid(0.8, 0.8, 2.0), x, kSym), domain_error);
  EXPECT_THROW(candidate_value_2d(CandidateSet::make_threshold(0.5), x, kSym), domain_error);
}

TEST(CandidateValueSpacetime, MatchesEarlyExercisePremiumForm) {
  const PutParams p{100.0, 0.05, 0.2, 1.0};
  amput::GridConfig g;
  g.clustering = amput::Clustering::Sqrt;
  g.rule = amput::TimeRule::GaussSqrt;
  const auto b = amput::solve_boundary(p, g);
  const auto set = b.as_candidate();
  for (auto [s, x] : {std::pair{0.0, 100.0}, std::pair{0.3, 85.0}, std::pair{0.7, 120.0}}) {
    const double v = candidate_value_spacetime(set, s, x, p);
    EXPECT_NEAR(v, amput::eep_value(s, x, b, p, amput::TimeRule::GaussSqrt).total, 1e-6 * p.K);
  }
}
