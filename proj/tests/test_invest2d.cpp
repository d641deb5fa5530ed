#include <gtest/gtest.h>

#include <cmath>

#include "rieszstop/error.hpp"
#include "rieszstop/invest2d.hpp"

using namespace rieszstop;
using invest2d::EllipsoidBoundary;

namespace {

const GbmParams kSym = GbmParams::two_dim(0.06, 0.06, 0.3, 0.3, 0.0, 0.06, 1.0);

// output of fit_boundary at the parameters above with the default FitConfig
const EllipsoidBoundary kFitted{0.57118070, 0.57118070, 1.174446, -0.44656};

}  // namespace

TEST(Invest2d, OneDimensionalThresholdIsFourSevenths) {
  EXPECT_NEAR(invest2d::one_dim_threshold(kSym, 0), 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(invest2d::one_dim_threshold(kSym, 1), 4.0 / 7.0, 1e-15);
}

TEST(Invest2d, BoundaryGammaEndpoints) {
  EXPECT_DOUBLE_EQ(invest2d::boundary_gamma(0.0, kFitted), kFitted.p2);
  EXPECT_DOUBLE_EQ(invest2d::boundary_gamma(kFitted.p1, kFitted), 0.0);
  EXPECT_THROW(invest2d::boundary_gamma(0.6, kFitted), domain_error);
  // finite slope at the axis: q close to 1 and kappa < 0
  const double h = 1e-7;
  const double slope = (invest2d::boundary_gamma(kFitted.p1, kFitted) -
                        invest2d::boundary_gamma(kFitted.p1 - h, kFitted)) / h;
  EXPECT_LT(slope, 0.0);
  EXPECT_GT(slope, -50.0);
}

TEST(Invest2d, ValidateBoundary) {
  EXPECT_TRUE(invest2d::validate_boundary(kFitted, 1.0).ok());
  EXPECT_FALSE(invest2d::validate_boundary({0.8, 0.8, 2.0, 0.0}, 1.0).inside_reward_set);
  EXPECT_FALSE(invest2d::validate_boundary({0.5, 0.5, 1.0, 0.6}, 1.0).convex);
  EXPECT_FALSE(invest2d::validate_boundary({0.5, 0.5, 0.9, 0.0}, 1.0).convex);
  EXPECT_FALSE(invest2d::validate_boundary({0.0, 0.5, 2.0, 0.0}, 1.0).positive_intercepts);
}

TEST(Invest2d, CollocationNodes) {
  const auto x = invest2d::collocation_nodes(0.5, 16);
  ASSERT_EQ(x.size(), 16u);
  for (std::size_t k = 0; k < x.size(); ++k) {
    EXPECT_GT(x[k], 0.0);
    EXPECT_LT(x[k], 0.5);
    EXPECT_NEAR(x[k] + x[x.size() - 1 - k], 0.5, 1e-15);
  }
  const auto half = invest2d::half_curve_nodes(kFitted, 8);
  const double U = (std::sqrt(1.0 + kFitted.kappa) - 1.0) / kFitted.kappa;
  const double diag = kFitted.p1 * std::pow(U, 1.0 / kFitted.q);
  EXPECT_NEAR(kFitted.gamma(diag), diag, 1e-12);
  for (double v : half) EXPECT_LT(v, diag);  // all on the upper half of the curve
  EXPECT_GT(half.back(), 0.9 * diag);
}

TEST(Invest2d, ResidualIsExchangeSymmetric) {
  const EllipsoidBoundary b{0.55, 0.55, 1.3, -0.2};
  const auto a = invest2d::residual_at(0.2, b, kSym);
  const auto m = invest2d::residual_at(a.x2, b, kSym);
  EXPECT_NEAR(m.x2, 0.2, 1e-12);
  EXPECT_NEAR(a.residual, m.residual, 1e-8);
}

TEST(Invest2d, FittedBoundarySatisfiesValueMatching) {
  const auto rep = invest2d::residual_report(kFitted, kSym, 16);
  ASSERT_EQ(rep.points.size(), 16u);
  EXPECT_LT(rep.sup, 1e-3);
  EXPECT_LE(rep.l2, rep.sup);
  // the straight line through the one-dimensional thresholds is far off
  const auto line = invest2d::residual_report({4.0 / 7.0, 4.0 / 7.0, 1.0, 0.0}, kSym, 16);
  EXPECT_GT(line.sup, 10.0 * rep.sup);
}

TEST(Invest2d, UniquenessGateOnScaledBoundaries) {
  const auto g = invest2d::uniqueness_gate(kFitted, {0.9, 1.1}, kSym);
  EXPECT_TRUE(g.pass);
  ASSERT_EQ(g.norms.size(), 2u);
  for (double n : g.norms) EXPECT_GT(n, 10.0 * g.fitted_norm);
  // a scaled boundary that leaves the admissible set gets an infinite norm
  const auto big = invest2d::uniqueness_gate(kFitted, {1.6}, kSym);
  EXPECT_TRUE(std::isinf(big.norms[0]));
  EXPECT_THROW(invest2d::uniqueness_gate(kFitted, {1.0}, kSym), domain_error);
}

TEST(Invest2d, ShortFitFromNearbyStartRecoversIntercept) {
  invest2d::FitConfig cfg;
  cfg.collocation = 8;
  cfg.q_starts = {kFitted.q};
  cfg.fix_q = true;
  cfg.restarts = 0;
  cfg.kappa_start = -0.4;
  const auto r = invest2d::fit_boundary(kSym, cfg);
  EXPECT_TRUE(r.symmetric);
  EXPECT_EQ(r.boundary.p1, r.boundary.p2);
  EXPECT_NEAR(r.boundary.p1, 4.0 / 7.0, 2e-3);
  EXPECT_LT(r.report.sup, 2e-3);
}

TEST(Invest2d, ConfigErrors) {
  invest2d::FitConfig cfg;
  cfg.collocation = 2;
  EXPECT_THROW(invest2d::fit_boundary(kSym, cfg), config_error);
  cfg.collocation = 16;
  cfg.q_starts.clear();
  EXPECT_THROW(invest2d::fit_boundary(kSym, cfg), config_error);
  EXPECT_THROW(invest2d::fit_boundary(GbmParams::one_dim(0.06, 0.3, 0.06, 1.0)), domain_error);
  EXPECT_THROW(invest2d::fit_boundary(GbmParams::two_dim(0.08, 0.06, 0.3, 0.3, 0.0, 0.06, 1.0)), domain_error);
  EXPECT_THROW(invest2d::residual_at(0.7, kFitted, kSym), domain_error);
}
