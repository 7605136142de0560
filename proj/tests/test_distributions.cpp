#include <gtest/gtest.h>

#include <random>

#include "diffdsr/distributions.hpp"
#include "diffdsr/schedule.hpp"
#include "oracles.hpp"

using namespace diffdsr;

TEST(ForwardMarginal, NoiselessEndpoint) {
  const std::vector<double> z{1.0, -2.0, 3.5};
  const auto g = forward_marginal(z, 0.0, 1.0);
  EXPECT_EQ(g.mean, z);
  EXPECT_EQ(g.sigma, 0.0);
}

TEST(ForwardMarginal, PriorLimit) {
  const std::vector<double> z{4.0, -4.0};
  const auto g = forward_marginal(z, 0.7, 1e-12);
  EXPECT_NEAR(g.sigma, 1.0, 1e-9);
  EXPECT_NEAR(g.mean[0], 0.0, 1e-5);
}

TEST(ForwardMarginal, CleanCaseMatchesScheduleEverywhere) {
  const auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
  const std::vector<double> z{2.0};
  for (std::size_t t = 1; t <= s.steps(); ++t) {
    const double a = s.alpha_bar(t);
    const auto g = forward_marginal(z, 0.0, a);
    ASSERT_EQ(g.mean[0], std::sqrt(a) * 2.0);
    ASSERT_EQ(g.sigma, std::sqrt(1.0 - a));
  }
}

TEST(ForwardMarginal, MonteCarloMoments) {
  oracle::Normal n(3);
  const double z0 = 2.5, s0 = 0.3, a = 0.6;
  const auto g = forward_marginal(std::vector<double>{z0}, s0, a);
  std::vector<double> draws(100000);
  for (auto& d : draws) d = std::sqrt(a) * (z0 + s0 * n()) + std::sqrt(1 - a) * n();
  const auto m = oracle::moments(draws);
  EXPECT_NEAR(m.mean / g.mean[0], 1.0, 0.01);
  EXPECT_NEAR(m.stddev / g.sigma, 1.0, 0.01);
}

TEST(ForwardMarginal, RejectsNonFinite) {
  EXPECT_THROW(forward_marginal(std::vector<double>{NAN}, 0.1, 0.5), std::invalid_argument);
  EXPECT_THROW(forward_marginal(std::vector<double>{1.0}, -0.1, 0.5), std::invalid_argument);
  EXPECT_THROW(forward_marginal(std::vector<double>{1.0}, 0.1, 0.0), std::invalid_argument);
}

TEST(Wasserstein, ForwardPairMatchesFullComputation) {
  oracle::Normal n(12);
  std::vector<double> z0(300), z(300);
  for (std::size_t i = 0; i < z.size(); ++i) z0[i] = 3 + n(), z[i] = 3 + n();
  double sq = 0;
  for (std::size_t i = 0; i < z.size(); ++i) sq += (z0[i] - z[i]) * (z0[i] - z[i]);
  for (double a : {1e-4, 0.3, 0.8, 1.0})
    for (double s0 : {0.0, 0.2, 1.5}) {
      const double full = wasserstein2_exact(forward_marginal(z0, s0, a), forward_marginal(z, 0.0, a));
      EXPECT_NEAR(wasserstein2_forward(sq, z.size(), s0, a), full, 1e-12 * (1 + full)) << a << " " << s0;
    }
  EXPECT_THROW(wasserstein2_forward(-1.0, 3, 0.1, 0.5), std::invalid_argument);
}

TEST(Wasserstein, IdentityAndEuclidean) {
  const IsotropicGaussian p{{0.0, 0.0}, 0.4};
  const IsotropicGaussian q{{3.0, 4.0}, 0.4};
  EXPECT_EQ(wasserstein2_exact(p, p), 0.0);
  EXPECT_DOUBLE_EQ(wasserstein2_exact(p, q), 5.0);
  EXPECT_THROW(wasserstein2_exact(p, IsotropicGaussian{{1.0}, 0.4}), std::invalid_argument);
}

TEST(Wasserstein, MatchesQuantileCoupling) {
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> m(-3, 3), s(0.05, 2.0);
  for (int i = 0; i < 5; ++i) {
    const double mp = m(eng), sp = s(eng), mq = m(eng), sq = s(eng);
    const double exact = wasserstein2_exact({{mp}, sp}, {{mq}, sq});
    EXPECT_NEAR(exact, oracle::w2_1d_quantile(mp, sp, mq, sq), 1e-3 * (1.0 + exact));
  }
}

TEST(Wasserstein, SurrogateExamples) {
  EXPECT_DOUBLE_EQ(wasserstein2_surrogate(1.0, 0.3), 0.3);
  EXPECT_DOUBLE_EQ(wasserstein2_surrogate(0.25, 0.4), 0.2);
}

// Per coordinate, the variance part of the exact distance,
// |sqrt(a s^2 + 1 - a) - sqrt(1 - a)|, never exceeds sqrt(a) * omega with
// omega^2 = |z0_hat - z|^2 + s^2.
TEST(Wasserstein, SurrogateBoundsVarianceTerm) {
  std::mt19937_64 eng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double z0 = 5 * u(eng), z = 5 * u(eng), s = 2 * u(eng), a = std::max(1e-9, u(eng));
    const auto p = forward_marginal(std::vector<double>{z0}, s, a);
    const auto q = forward_marginal(std::vector<double>{z}, 0.0, a);
    const double variance_part = std::abs(p.sigma - q.sigma);
    const double omega = std::hypot(z0 - z, s);
    EXPECT_LE(variance_part, wasserstein2_surrogate(a, omega) + 1e-15);
  }
}

TEST(Objective, Examples) {
  EXPECT_NEAR(h_objective(0.25, {2.0, 1.0}), static_cast<double>(oracle::h_value(0.25L, 2.0L, 1.0L)), 1e-15);
  EXPECT_NEAR(h_objective(0.25, {2.0, 1.0}), 0.18393972, 1e-8);
  EXPECT_NEAR(h_objective(1.0, {0.5, 1.0}), 0.60653066, 1e-8);
  EXPECT_LT(h_objective(1e-12, {1.0, 1.0}), 1e-5);
}

TEST(Objective, LogSpaceAgreesWhereBothAreFinite) {
  const TradeoffParams p{40.0, 1.0};
  for (double a : {0.5, 0.8, 1.0}) {
    EXPECT_NEAR(std::log(h_objective(a, p)), log_h_objective(a, p), 1e-12);
    EXPECT_GT(h_objective(a, p), 0.0);
  }
}

TEST(Maximizer, ClosedFormAndBoundary) {
  EXPECT_DOUBLE_EQ(h_maximizer({2.0, 1.0}), 0.25);
  EXPECT_EQ(h_maximizer({1.0, 1.0}), 1.0);
  EXPECT_EQ(h_maximizer({0.3, 2.0}), 1.0);
  EXPECT_THROW(h_maximizer({0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(h_maximizer({1.0, -1.0}), std::invalid_argument);
}

TEST(Maximizer, GoldenSectionAgrees) {
  std::mt19937_64 eng(17);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int i = 0; i < 100; ++i) {
    const TradeoffParams p{u(eng), u(eng)};
    const double ref = oracle::golden_max(
        [&](double a) { return static_cast<double>(oracle::h_value(a, p.lambda, p.omega)); }, 1e-9, 1.0);
    EXPECT_NEAR(h_maximizer(p), ref, 1e-6) << p.lambda << " " << p.omega;
  }
}
