#include <gtest/gtest.h>

#include <random>

#include "diffdsr/calibration.hpp"
#include "diffdsr/degradation.hpp"
#include "diffdsr/evaluation.hpp"
#include "diffdsr/scenegen.hpp"
#include "oracles.hpp"

using namespace diffdsr;

namespace {

Scene scene(std::uint64_t seed, std::size_t side = 128) {
  SceneSpec s;
  s.width = s.height = side;
  s.seed = seed;
  return generate_scene(s);
}

DepthField degrade(const DepthField& gt, DegradationSpec spec, std::uint64_t seed) {
  spec.seed = seed;
  return apply_spec(gt, spec);
}

DegradationSpec light() {
  DegradationSpec s;
  s.downsample_factor = 2.0;
  return s;
}

}  // namespace

TEST(Calibrate, FullResolutionInputIsNoOp) {
  const Scene sc = scene(3);
  const auto out = calibrate(sc.guide, sc.depth, {1.0, 0.1, kSigmaFloor});
  for (std::size_t i = 0; i < sc.depth.size(); ++i) {
    ASSERT_NEAR(out.z0_hat[i], sc.depth[i], 1e-6);
    ASSERT_EQ(out.sigma0_map[i], kSigmaFloor);
  }
  EXPECT_EQ(out.sigma_bar, kSigmaFloor);
}

TEST(Calibrate, ConstantInputStaysConstant) {
  const Scene sc = scene(4);
  const DepthField low(16, 16, 2.75);
  const auto out = calibrate(sc.guide, low, {1.0, 0.1, kSigmaFloor});
  for (std::size_t i = 0; i < out.z0_hat.size(); ++i) ASSERT_NEAR(out.z0_hat[i], 2.75, 1e-12);
}

TEST(Calibrate, Invariants) {
  const Scene sc = scene(5);
  const DepthField low = degrade(sc.depth, DegradationSpec::heaviest(), 5);
  const auto out = calibrate(sc.guide, low, {2.0, 0.1, kSigmaFloor});
  EXPECT_TRUE(out.z0_hat.fully_valid());
  for (double s : out.sigma0_map) {
    ASSERT_TRUE(std::isfinite(s));
    ASSERT_GE(s, kSigmaFloor);
  }
  EXPECT_NEAR(out.sigma_bar, static_cast<double>(oracle::serial_mean(out.sigma0_map.values())), 1e-12);
}

TEST(Calibrate, RejectsAllInvalidInput) {
  const Scene sc = scene(6);
  EXPECT_THROW(calibrate(sc.guide, DepthField(8, 8), {}), std::invalid_argument);
}

TEST(Calibrate, BeatsBicubicUnderAppendixDegradations) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Scene sc = scene(seed, 256);
    const DepthField low = degrade(sc.depth, DegradationSpec::heaviest(), seed + 50);
    const auto out = calibrate(sc.guide, low, {1.0, 0.1, kSigmaFloor});
    const DepthField bicubic = bicubic_resize(low, sc.depth.width(), sc.depth.height());
    EXPECT_LT(compute_metrics(out.z0_hat, sc.depth).rmse, compute_metrics(bicubic, sc.depth).rmse) << seed;
  }
}

TEST(Calibrate, JointBilateralIsConvex) {
  std::mt19937_64 eng(1);
  std::uniform_real_distribution<double> u(1.0, 6.0);
  const Scene sc = scene(7, 64);
  DepthField low(16, 16);
  for (std::size_t i = 0; i < low.size(); ++i) low.set(i, u(eng));
  const DepthField up = joint_bilateral_upsample(sc.guide, low, 0.1);
  // each output lies within the range of the 2x2 low-res block around it
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      const double lx = (x + 0.5) / 4.0 - 0.5, ly = (y + 0.5) / 4.0 - 0.5;
      double lo = 1e9, hi = -1e9;
      for (long dy = 0; dy <= 1; ++dy)
        for (long dx = 0; dx <= 1; ++dx) {
          const double v = low.values().clamped(static_cast<long>(std::floor(lx)) + dx, static_cast<long>(std::floor(ly)) + dy);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      ASSERT_GE(up(x, y), lo - 1e-12);
      ASSERT_LE(up(x, y), hi + 1e-12);
    }
}

TEST(Calibrate, HeavyDegradationRaisesUncertainty) {
  double heavy = 0, lite = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene sc = scene(seed);
    DegradationSpec h;
    h.downsample_factor = 16.0;
    h.noise_sigma = 0.05;
    heavy += calibrate(sc.guide, degrade(sc.depth, h, seed), {}).sigma_bar;
    lite += calibrate(sc.guide, degrade(sc.depth, light(), seed), {}).sigma_bar;
  }
  EXPECT_GT(heavy, lite);
}

TEST(Nll, Examples) {
  const std::vector<double> a{1.0, 2.0, 3.0}, b{1.5, 2.0, 2.0};
  EXPECT_DOUBLE_EQ(nll_loss(a, std::vector<double>(3, 1.0), b), (0.25 + 0.0 + 1.0) / 3.0);
  EXPECT_DOUBLE_EQ(nll_loss(a, std::vector<double>(3, 0.4), a), 2.0 * std::log(0.4));
  EXPECT_THROW(nll_loss(a, std::vector<double>(2, 1.0), b), std::invalid_argument);
}

TEST(Nll, SerialOracle) {
  std::mt19937_64 eng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> z(4096), s(4096), g(4096);
  long double ref = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = 5 * u(eng);
    g[i] = 5 * u(eng);
    s[i] = 0.01 + u(eng);
    ref += std::log(static_cast<long double>(s[i]) * s[i]) +
           (static_cast<long double>(z[i]) - g[i]) * (static_cast<long double>(z[i]) - g[i]) /
               (static_cast<long double>(s[i]) * s[i]);
  }
  EXPECT_NEAR(nll_loss(z, s, g), static_cast<double>(ref / z.size()), 1e-10);
}

TEST(FitScale, RecoversUnitScale) {
  oracle::Normal n(8);
  std::mt19937_64 eng(8);
  std::uniform_real_distribution<double> u(0.05, 0.5);
  CalibrationSample s;
  for (int i = 0; i < 200000; ++i) {
    const double raw = u(eng), gt = 3.0;
    s.raw_sigma.push_back(raw);
    s.z_gt.push_back(gt);
    s.z0_hat.push_back(gt + raw * n());
  }
  const std::vector<CalibrationSample> corpus{s};
  EXPECT_NEAR(fit_sigma_scale(corpus), 1.0, 0.05);
}

TEST(FitScale, ZeroResidualsHitLowerBound) {
  CalibrationSample s{{1.0, 2.0}, {0.1, 0.2}, {1.0, 2.0}};
  const std::vector<CalibrationSample> corpus{s};
  EXPECT_NEAR(fit_sigma_scale(corpus), 1e-3, 1e-6);
  EXPECT_THROW(fit_sigma_scale(std::span<const CalibrationSample>{}), std::invalid_argument);
}

TEST(FitScale, LocallyOptimal) {
  std::vector<CalibrationSample> corpus;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Scene sc = scene(seed);
    const auto r = refine(sc.guide, degrade(sc.depth, DegradationSpec::heaviest(), seed), 0.1);
    corpus.push_back({r.z0_hat.values().values(), r.raw_sigma.values(), sc.depth.values().values()});
  }
  const double c = fit_sigma_scale(corpus);
  auto nll = [&](double k) {
    long double sum = 0;
    std::size_t n = 0;
    for (const auto& s : corpus) {
      std::vector<double> sig(s.raw_sigma.size());
      for (std::size_t i = 0; i < sig.size(); ++i) sig[i] = std::max(k * s.raw_sigma[i], kSigmaFloor);
      sum += nll_loss(s.z0_hat, sig, s.z_gt) * s.z0_hat.size();
      n += s.z0_hat.size();
    }
    return static_cast<double>(sum / n);
  };
  EXPECT_LE(nll(c), nll(c / 2));
  EXPECT_LE(nll(c), nll(2 * c));
}

TEST(DepthLoss, Examples) {
  const DepthField a(4, 4, 2.0), b(4, 4, 2.5);
  EXPECT_EQ(l_d_loss(a, a), 0.0);
  EXPECT_DOUBLE_EQ(l_d_loss(b, a), 0.5);
  EXPECT_THROW(l_d_loss(a, DepthField(4, 4)), std::invalid_argument);
}

TEST(DepthLoss, SerialOracle) {
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> u(0.5, 5.0);
  DepthField a(32, 32), b(32, 32);
  long double ref = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.set(i, u(eng));
    b.set(i, i % 7 ? u(eng) : NAN);
    if (b.valid(i)) {
      ref += std::fabs(static_cast<long double>(a[i]) - b[i]);
      ++n;
    }
  }
  EXPECT_NEAR(l_d_loss(a, b), static_cast<double>(ref / n), 1e-12);
}
