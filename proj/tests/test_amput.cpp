#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rieszstop/amput.hpp"
#include "rieszstop/error.hpp"
#include "rieszstop/rng.hpp"

using namespace rieszstop;
using amput::Clustering;
using amput::TimeRule;

namespace {

const PutParams kPut{100.0, 0.05, 0.2, 1.0};

amput::GridConfig accurate(int steps = 200) {
  amput::GridConfig g;
  g.steps = steps;
  g.clustering = Clustering::Sqrt;
  g.rule = TimeRule::GaussSqrt;
  return g;
}

const amput::ExerciseBoundary& solved() {
  static const auto b = amput::solve_boundary(kPut, accurate());
  return b;
}

}  // namespace

TEST(EuropeanPut, MatchesQuadratureAgainstLognormalDensity) {
  for (const PutParams& p : {kPut, PutParams{1.0, 0.06, 0.3, 2.0}}) {
    for (double s : {0.0, 0.4}) {
      for (double xf : {0.7, 1.0, 1.3}) {
        const double x = xf * p.K;
        EXPECT_NEAR(amput::european_put(s, x, p), oracle::put_by_quadrature(p.K, p.r, p.vol, p.T - s, x),
                    1e-8 * p.K)
            << s << ' ' << x;
      }
    }
  }
  EXPECT_EQ(amput::european_put(1.0, 80.0, kPut), 20.0);
  EXPECT_EQ(amput::european_put(1.0, 120.0, kPut), 0.0);
}

TEST(EuropeanPut, ParityWithForward) {
  // put - call = K e^{-r tau} - x, with the call by quadrature of (y - K)^+
  const double x = 95.0, tau = 1.0;
  const double put = amput::european_put(0.0, x, kPut);
  const double nu = kPut.r - 0.5 * kPut.vol * kPut.vol;
  auto f = [&](double y) { return (y - kPut.K) * oracle::lognormal_pdf(y, x, nu, kPut.vol, tau); };
  const double call = std::exp(-kPut.r * tau) *
                      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, kPut.K, 2000.0, 20, 1e-14);
  EXPECT_NEAR(put - call, kPut.K * std::exp(-kPut.r * tau) - x, 1e-8);
}

TEST(CrossingProb, LimitsAndMedian) {
  EXPECT_NEAR(amput::crossing_prob(0.0, 90.0, 1e-12, 95.0, kPut), 1.0, 1e-12);
  EXPECT_NEAR(amput::crossing_prob(0.0, 100.0, 1e-12, 95.0, kPut), 0.0, 1e-12);
  const double tau = 0.7, nu = kPut.r - 0.5 * kPut.vol * kPut.vol;
  EXPECT_NEAR(amput::crossing_prob(0.1, 90.0, 0.1 + tau, 90.0 * std::exp(nu * tau), kPut), 0.5, 1e-15);
  EXPECT_THROW(amput::crossing_prob(0.5, 90.0, 0.5, 95.0, kPut), domain_error);
}

TEST(CrossingProb, MatchesSampledFrequency) {
  const double s = 0.2, t = 0.9, x = 100.0, level = 92.0;
  const double nu = kPut.r - 0.5 * kPut.vol * kPut.vol;
  CounterRng rng(17);
  std::normal_distribution<double> normal;
  const int n = 1000000;
  int below = 0;
  for (int i = 0; i < n; ++i) below += x * std::exp(nu * (t - s) + kPut.vol * std::sqrt(t - s) * normal(rng)) < level;
  const double p = amput::crossing_prob(s, x, t, level, kPut);
  EXPECT_NEAR(static_cast<double>(below) / n, p, 4.0 * std::sqrt(p * (1.0 - p) / n));
}

TEST(SolveBoundary, ShapeAndTerminalValue) {
  const auto& b = solved();
  EXPECT_EQ(b.b.back(), kPut.K);
  const auto shape = amput::check_boundary_shape(b, kPut.K);
  EXPECT_TRUE(shape.terminal_at_strike);
  EXPECT_TRUE(shape.nondecreasing);
  EXPECT_TRUE(shape.below_strike);
  EXPECT_GT(b.b.front(), 0.7 * kPut.K);
  // below the perpetual threshold theta K/(1 + theta) with theta = 2r/vol^2
  EXPECT_GT(b.b.front(), 2.5 / 3.5 * kPut.K);
}

TEST(SolveBoundary, BothTimeRulesMatchBinomialOracle) {
  const auto oracle = amput::binomial_oracle(kPut, 5000, 100.0);
  const auto coarse = amput::solve_boundary(kPut);
  const double v_coarse = amput::eep_value(0.0, 100.0, coarse, kPut, TimeRule::Trapezoid).total;
  EXPECT_NEAR(v_coarse, oracle.value, 5e-3 * oracle.value);
  const double v = amput::eep_value(0.0, 100.0, solved(), kPut).total;
  EXPECT_NEAR(v, oracle.value, 1e-4 * oracle.value);
}

TEST(SolveBoundary, GridRefinementMovesStartValueLittle) {
  const auto fine = amput::solve_boundary(kPut, accurate(400));
  EXPECT_LT(std::abs(fine.b.front() - solved().b.front()), 1e-3 * kPut.K);
  const auto u200 = amput::solve_boundary(kPut);
  auto g = amput::GridConfig{};
  g.steps = 400;
  const auto u400 = amput::solve_boundary(kPut, g);
  EXPECT_LT(std::abs(u400.b.front() - u200.b.front()), 1e-3 * kPut.K);
}

TEST(SolveBoundary, LongMaturityApproachesPerpetualThreshold) {
  const PutParams p{1.0, 0.06, 0.3, 50.0};
  const auto b = amput::solve_boundary(p, accurate());
  EXPECT_NEAR(b.b.front(), 4.0 / 7.0, 2e-2);
}

TEST(EepValue, ValueMatchingInsideTheExerciseRegion) {
  const auto& b = solved();
  for (double s : {0.0, 0.5, 0.9}) {
    const double bs = b.at(s);
    for (double f : {0.6, 0.9, 1.0}) {
      const double x = f * bs;
      EXPECT_TRUE(amput::in_exercise_region(s, x, b));
      EXPECT_NEAR(amput::eep_value(s, x, b, kPut).total, kPut.K - x, 2e-4 * kPut.K) << s << ' ' << f;
    }
    EXPECT_FALSE(amput::in_exercise_region(s, 1.01 * bs, b));
  }
}

TEST(EepValue, DominatesEuropeanAndIntrinsic) {
  const auto& b = solved();
  for (double s : {0.0, 0.3, 0.8}) {
    for (double x : {70.0, 90.0, 100.0, 130.0}) {
      const auto e = amput::eep_value(s, x, b, kPut);
      EXPECT_GE(e.premium, 0.0);
      EXPECT_DOUBLE_EQ(e.total, e.premium + e.european);
      EXPECT_GE(e.total, std::max(kPut.K - x, 0.0) - 2e-4 * kPut.K);
    }
  }
}

TEST(BoundaryGate, SolvedCurveHasSmallestResidual) {
  const auto g = amput::boundary_uniqueness_gate(solved(), kPut);
  EXPECT_TRUE(g.pass) << g.solved_max << ' ' << g.min_factor;
  EXPECT_LT(g.solved_max, 1e-6 * kPut.K);
}

TEST(BinomialOracle, PropertiesAndConvergence) {
  const auto a = amput::binomial_oracle(kPut, 2500, 100.0);
  const auto b = amput::binomial_oracle(kPut, 5000, 100.0);
  EXPECT_TRUE(b.dominates_intrinsic);
  EXPECT_TRUE(b.dominates_european);
  EXPECT_NEAR(a.value, b.value, 2e-3);
  EXPECT_NEAR(b.european, amput::european_put(0.0, 100.0, kPut), 2e-3);
  EXPECT_GT(b.value, b.european);
  // the tree's exercise frontier tracks the integral-equation boundary
  EXPECT_NEAR(b.b[2500], solved().at(0.5), 0.5);
}

TEST(Amput, Errors) {
  EXPECT_THROW(amput::solve_boundary(kPut, amput::GridConfig{10}), domain_error);
  EXPECT_THROW(amput::binomial_oracle(kPut, 50, 100.0), domain_error);
  EXPECT_THROW(amput::european_put(1.5, 100.0, kPut), domain_error);
  EXPECT_THROW(amput::eep_value(1.0, 100.0, solved(), kPut), domain_error);
  EXPECT_THROW(amput::solve_boundary(PutParams{100.0, 0.05, 0.0, 1.0}), domain_error);
}
