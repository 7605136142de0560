#pragma once

// Procedural piecewise-smooth scenes: a background plane or ramp with
// rectangles and disks composited back to front, plus an intensity guide
// whose edges coincide with the depth edges.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "diffdsr/depth_field.hpp"
#include "diffdsr/error.hpp"
#include "diffdsr/grid.hpp"
#include "diffdsr/rng.hpp"

namespace diffdsr {

enum class Shape { Plane, Ramp, Rectangle, Disk };

inline std::string to_string(Shape s) {
  switch (s) {
    case Shape::Plane: return "plane";
    case Shape::Ramp: return "ramp";
    case Shape::Rectangle: return "rectangle";
    case Shape::Disk: return "disk";
  }
  return "unknown";
}

inline Shape parse_shape(std::string_view text) {
  if (text == "plane") return Shape::Plane;
  if (text == "ramp") return Shape::Ramp;
  if (text == "rectangle") return Shape::Rectangle;
  if (text == "disk") return Shape::Disk;
  throw std::invalid_argument("unknown shape '" + std::string(text) + "'");
}

struct SceneSpec {
  std::size_t width = 128;
  std::size_t height = 128;
  std::size_t layers = 3;
  double depth_min = 1.0;
  double depth_max = 5.0;
  std::set<Shape> shapes{Shape::Plane, Shape::Ramp, Shape::Rectangle, Shape::Disk};
  // When non-empty, layer depths are drawn from these values (without
  // replacement while enough remain) instead of uniformly from the range.
  std::vector<double> levels;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(width >= 16 && height >= 16, "scene dimensions must be >= 16");
    detail::require(layers >= 1, "scene needs at least one layer");
    detail::require(std::isfinite(depth_min) && depth_min > 0.0, "depth_min must be > 0");
    detail::require(std::isfinite(depth_max) && depth_max > depth_min, "depth_max must exceed depth_min");
    detail::require(!shapes.empty(), "shape vocabulary is empty");
    for (double l : levels)
      detail::require(l >= depth_min && l <= depth_max, "depth levels must lie in [depth_min, depth_max]");
  }

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

/// Foreground shapes leave either no gap or at least this fraction of the
/// short side between themselves and the frame.
inline constexpr double kBorderMargin = 0.0625;

struct Scene {
  DepthField depth;
  ScalarField guide;
};

namespace detail {

class SceneDraws {
 public:
  explicit SceneDraws(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return rng_.uniform(StreamId::SceneLayout, counter_++); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
  }

 private:
  CounterRng rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace detail

inline Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  detail::SceneDraws draw(spec.seed);
  const std::size_t W = spec.width, H = spec.height;

  // Layer depths, far to near.
  std::vector<double> depths;
  if (!spec.levels.empty()) {
    std::vector<double> pool = spec.levels;
    for (std::size_t l = 0; l < spec.layers; ++l) {
      if (pool.empty()) pool = spec.levels;
      const std::size_t k = draw.index(pool.size());
      depths.push_back(pool[k]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
    }
  } else {
    for (std::size_t l = 0; l < spec.layers; ++l) depths.push_back(draw.uniform(spec.depth_min, spec.depth_max));
  }
  std::sort(depths.begin(), depths.end(), std::greater<>());

  std::vector<Shape> backgrounds, foregrounds;
  for (Shape s : spec.shapes) (s == Shape::Plane || s == Shape::Ramp ? backgrounds : foregrounds).push_back(s);
  if (backgrounds.empty()) backgrounds.push_back(Shape::Plane);

  ScalarField depth(W, H, depths[0]);
  auto paint_background = [&](Shape kind, double d0) {
    if (kind == Shape::Plane) {
      for (double& v : depth) v = d0;
      return;
    }
    // Ramp from d0 to a second depth along a random direction.
    const double d1 = draw.uniform(spec.depth_min, spec.depth_max);
    const double theta = draw.uniform(0.0, 2.0 * std::numbers::pi);
    const double cx = std::cos(theta), cy = std::sin(theta);
    double lo = 1e300, hi = -1e300;
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double p = cx * static_cast<double>(x) + cy * static_cast<double>(y);
        lo = std::min(lo, p);
        hi = std::max(hi, p);
      }
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double t = (cx * static_cast<double>(x) + cy * static_cast<double>(y) - lo) / std::max(hi - lo, 1e-12);
        depth(x, y) = d0 + (d1 - d0) * t;
      }
  };

  paint_background(backgrounds[draw.index(backgrounds.size())], depths[0]);
  const double fw = static_cast<double>(W), fh = static_cast<double>(H);
  const double margin = kBorderMargin * std::min(fw, fh);
  for (std::size_t l = 1; l < spec.layers; ++l) {
    if (foregrounds.empty()) {
      paint_background(backgrounds[draw.index(backgrounds.size())], depths[l]);
      continue;
    }
    const Shape kind = foregrounds[draw.index(foregrounds.size())];
    const double d = depths[l];
    if (kind == Shape::Rectangle) {
      const double rw = draw.uniform(0.2, 0.6) * fw, rh = draw.uniform(0.2, 0.6) * fh;
      double x0 = draw.uniform(0.0, fw - rw), y0 = draw.uniform(0.0, fh - rh);
      double x1 = x0 + rw, y1 = y0 + rh;
      // Edges closer than the margin to the frame are made flush with it.
      if (x0 < margin) x0 = 0.0;
      if (y0 < margin) y0 = 0.0;
      if (fw - x1 < margin) x1 = fw;
      if (fh - y1 < margin) y1 = fh;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
          if (px >= x0 && px < x1 && py >= y0 && py < y1) depth(x, y) = d;
        }
    } else {
      const double r = draw.uniform(0.1, 0.3) * std::min(fw, fh);
      const double cx = draw.uniform(r + margin, fw - r - margin);
      const double cy = draw.uniform(r + margin, fh - r - margin);
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
          if (dx * dx + dy * dy <= r * r) depth(x, y) = d;
        }
    }
  }

  // Guide: normalised depth (far = bright) blended with a smooth seeded
  // texture.
  const CounterRng tex(derive_seed(spec.seed, 1));
  const double fx = 1.0 + 2.0 * tex.uniform(StreamId::SceneTexture, 0);
  const double fy = 1.0 + 2.0 * tex.uniform(StreamId::SceneTexture, 1);
  const double phase = 2.0 * std::numbers::pi * tex.uniform(StreamId::SceneTexture, 2);
  ScalarField guide(W, H);
  const double span = spec.depth_max - spec.depth_min;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (fx * static_cast<double>(x) / fw +
                                                                       fy * static_cast<double>(y) / fh) + phase);
      guide(x, y) = 0.85 * (depth(x, y) - spec.depth_min) / span + 0.15 * t;
    }

  return Scene{DepthField(std::move(depth)), std::move(guide)};
}

}  // namespace diffdsr
