#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "phi4q/lattice_model.hpp"

using namespace phi4q;
using namespace phi4q::lattice;

TEST(Dispersion, TwoSiteFrequencies) {
  const auto g = momentum_grid(2, 1.0);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_DOUBLE_EQ(g.momenta[0], 0.0);
  EXPECT_DOUBLE_EQ(g.momenta[1], std::numbers::pi);
  EXPECT_NEAR(g.frequencies[0], 1.0, 1e-15);
  EXPECT_NEAR(g.frequencies[1], std::sqrt(5.0), 1e-15);
}

TEST(Dispersion, QuarterMomentum) {
  const auto g = momentum_grid(4, 1.5);
  EXPECT_NEAR(g.frequencies[1] * g.frequencies[1], 3.5, 1e-14);
  EXPECT_NEAR(g.frequencies[1], g.frequencies[3], 1e-14);
}

TEST(Dispersion, MasslessZoneEdge) {
  EXPECT_NEAR(dispersion(std::numbers::pi, 0.0), 2.0, 1e-15);
  EXPECT_THROW(dispersion(0.0, -1.0), ValidationError);
}

TEST(Dispersion, RejectsBadInput) {
  EXPECT_THROW(momentum_grid(0, 1.0), ValidationError);
  EXPECT_THROW(momentum_grid(2, 0.0), ValidationError);
}

TEST(Counterterm, FirstOrderTwoSites) {
  EXPECT_NEAR(counterterm_first_order(2, 1.0, 1.0), -0.18090169943749473, 1e-12);
  EXPECT_NEAR(counterterm_first_order(2, 0.1, 4.0), -1.828071229246587, 1e-12);
  EXPECT_EQ(counterterm_first_order(8, 1.5, 0.0), 0.0);
}

TEST(Counterterm, LinearAndDecreasingInLambda) {
  for (int L : {2, 8, 32}) {
    const double d1 = counterterm_first_order(L, 0.1, 1.0);
    EXPECT_LT(d1, 0.0);
    EXPECT_NEAR(counterterm_first_order(L, 0.1, 3.5), 3.5 * d1, 1e-12);
  }
}

TEST(Counterterm, Continuum) {
  EXPECT_NEAR(counterterm_continuum(1.0, 1.0), -0.1654767001144887, 1e-13);
  EXPECT_DOUBLE_EQ(counterterm_continuum(64.0, 3.0), 0.0);
  EXPECT_THROW(counterterm_continuum(65.0, 1.0), ValidationError);
  EXPECT_THROW(counterterm_continuum(0.0, 1.0), ValidationError);
}

TEST(Counterterm, ConvergesInL) {
  // L -> infinity: -(lambda/4) (2/pi) K(kappa) / sqrt(m_sq + 4), kappa^2 = 4 / (m_sq + 4).
  const double m_sq = 0.1;
  const double limit = -0.25 * (2.0 / std::numbers::pi) *
                       std::comp_ellint_1(std::sqrt(4.0 / (m_sq + 4.0))) / std::sqrt(m_sq + 4.0);
  double prev = INFINITY;
  for (int L : {8, 16, 32, 64}) {
    const double err = std::abs(counterterm_first_order(L, m_sq, 1.0) - limit);
    EXPECT_LT(err, prev) << "L=" << L;
    prev = err;
  }
  EXPECT_LT(prev, 1e-6);
  // The log form is the small-mass expansion of the same limit.
  EXPECT_NEAR(counterterm_continuum(m_sq, 1.0), limit, 0.01 * std::abs(limit));
}

TEST(ModelParams, BareMass) {
  const auto p = ModelParams::from_bare_mass(2, 1.0, -1.5, 6.0, 4);
  EXPECT_DOUBLE_EQ(p.delta_m, -2.5);
  EXPECT_DOUBLE_EQ(p.m0_sq(), -1.5);
  EXPECT_DOUBLE_EQ(delta_from_masses(-1.5, 1.0), -2.5);
  EXPECT_EQ(p.hilbert_dim(), 16u);
  EXPECT_THROW(delta_from_masses(0.0, 0.0), ValidationError);
}

TEST(ModelParams, Validate) {
  EXPECT_NO_THROW(ModelParams{}.validate());
  EXPECT_THROW((ModelParams{0, 1.0, 0.0, 0.0, 4}.validate()), ValidationError);
  EXPECT_THROW((ModelParams{2, -1.0, 0.0, 0.0, 4}.validate()), ValidationError);
  EXPECT_THROW((ModelParams{2, 1.0, 0.0, 0.0, 1}.validate()), ValidationError);
  EXPECT_TRUE(is_power_of_two(8));
  EXPECT_FALSE(is_power_of_two(6));
}
