#include <gtest/gtest.h>

#include <algorithm>

#include "diffdsr/scenegen.hpp"

using namespace diffdsr;

namespace {

std::vector<double> gradient_magnitude(const ScalarField& f) {
  std::vector<double> g(f.size());
  for (std::size_t y = 0; y < f.height(); ++y)
    for (std::size_t x = 0; x < f.width(); ++x) {
      const double dx = f.clamped(static_cast<long>(x) + 1, static_cast<long>(y)) - f(x, y);
      const double dy = f.clamped(static_cast<long>(x), static_cast<long>(y) + 1) - f(x, y);
      g[y * f.width() + x] = std::hypot(dx, dy);
    }
  return g;
}

double percentile(std::vector<double> v, double q) {
  const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

}  // namespace

TEST(Scene, SinglePlaneIsConstant) {
  SceneSpec s;
  s.layers = 1;
  s.shapes = {Shape::Plane};
  s.seed = 4;
  const auto sc = generate_scene(s);
  const double d = sc.depth[0];
  EXPECT_GE(d, s.depth_min);
  EXPECT_LE(d, s.depth_max);
  for (std::size_t i = 0; i < sc.depth.size(); ++i) ASSERT_EQ(sc.depth[i], d);
}

TEST(Scene, Deterministic) {
  SceneSpec s;
  s.seed = 99;
  const auto a = generate_scene(s), b = generate_scene(s);
  EXPECT_EQ(a.depth.values(), b.depth.values());
  EXPECT_EQ(a.guide, b.guide);
  s.seed = 100;
  EXPECT_NE(generate_scene(s).depth.values(), a.depth.values());
}

TEST(Scene, RangeAndValidityOverSeeds) {
  SceneSpec s;
  s.width = 64;
  s.height = 48;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    s.seed = seed;
    const auto sc = generate_scene(s);
    ASSERT_TRUE(sc.depth.fully_valid());
    ASSERT_EQ(sc.guide.width(), 64u);
    ASSERT_EQ(sc.guide.height(), 48u);
    for (std::size_t i = 0; i < sc.depth.size(); ++i) {
      ASSERT_GE(sc.depth[i], s.depth_min);
      ASSERT_LE(sc.depth[i], s.depth_max);
    }
  }
}

TEST(Scene, LevelsAreUsedExactly) {
  SceneSpec s;
  s.layers = 2;
  s.shapes = {Shape::Plane, Shape::Rectangle, Shape::Disk};
  s.levels = {2.0, 5.0};
  s.depth_max = 6.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    s.seed = seed;
    const auto sc = generate_scene(s);
    for (std::size_t i = 0; i < sc.depth.size(); ++i) ASSERT_TRUE(sc.depth[i] == 2.0 || sc.depth[i] == 5.0);
  }
}

TEST(Scene, GuideEdgesFollowDepthEdges) {
  std::size_t strong = 0, matched = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SceneSpec s;
    s.seed = seed;
    const auto sc = generate_scene(s);
    const auto gd = gradient_magnitude(sc.depth.values());
    const auto gg = gradient_magnitude(sc.guide);
    const double td = percentile(gd, 0.99), tg = percentile(gg, 0.95);
    for (std::size_t i = 0; i < gd.size(); ++i) {
      if (gd[i] <= td) continue;
      ++strong;
      matched += gg[i] > tg;
    }
  }
  ASSERT_GT(strong, 0u);
  EXPECT_GE(static_cast<double>(matched) / static_cast<double>(strong), 0.9) << matched << "/" << strong;
}

TEST(Scene, Validation) {
  SceneSpec s;
  s.width = 8;
  EXPECT_THROW(generate_scene(s), std::invalid_argument);
  s = {};
  s.depth_min = 0.0;
  EXPECT_THROW(generate_scene(s), std::invalid_argument);
  s = {};
  s.depth_max = s.depth_min;
  EXPECT_THROW(generate_scene(s), std::invalid_argument);
  s = {};
  s.shapes.clear();
  EXPECT_THROW(generate_scene(s), std::invalid_argument);
}
