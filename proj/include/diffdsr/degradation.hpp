#pragma once

// Synthetic low-resolution degradation: bicubic downsampling followed by
// additive noise, blur, pixel removal with nearest-neighbour fill and
// low-bit quantization, always in that order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "diffdsr/depth_field.hpp"
#include "diffdsr/error.hpp"
#include "diffdsr/rng.hpp"

namespace diffdsr {

struct BlurSpec {
  std::size_t kernel_size = 3;
  double sigma = 0.5;

  friend bool operator==(const BlurSpec&, const BlurSpec&) = default;
};

struct DegradationSpec {
  double downsample_factor = 1.0;
  double noise_sigma = 0.0;  // standard deviation, meters
  std::optional<BlurSpec> blur;
  double removal_fraction = 0.0;
  double quantization_step = 0.0;  // meters; 0 disables
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(std::isfinite(downsample_factor) && downsample_factor >= 1.0,
                    "downsample factor must be >= 1");
    detail::require(std::isfinite(noise_sigma) && noise_sigma >= 0.0, "noise sigma must be >= 0");
    if (blur) {
      detail::require(blur->kernel_size % 2 == 1, "blur kernel size must be odd");
      detail::require(std::isfinite(blur->sigma) && blur->sigma > 0.0, "blur sigma must be > 0");
    }
    detail::require(removal_fraction >= 0.0 && removal_fraction < 1.0,
                    "removal fraction must lie in [0, 1)");
    detail::require(std::isfinite(quantization_step) && quantization_step >= 0.0,
                    "quantization step must be >= 0");
  }

  friend bool operator==(const DegradationSpec&, const DegradationSpec&) = default;

  /// Every appendix perturbation on top of a 16x downsample.
  static DegradationSpec heaviest() {
    DegradationSpec s;
    s.downsample_factor = 16.0;
    s.noise_sigma = 0.05;
    s.blur = BlurSpec{3, 0.5};
    s.removal_fraction = 0.3;
    s.quantization_step = 0.1;
    return s;
  }
};

namespace detail {

// Catmull-Rom (a = -0.5).
inline double cubic_weight(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

// Floors a depth value so degradations never manufacture invalid pixels.
inline double keep_positive(double v) { return std::max(v, 1e-6); }

}  // namespace detail

/// Catmull-Rom resampling to an explicit output size, pixel-centre aligned
/// and edge clamped. Invalid taps are dropped and the remaining weights
/// renormalised; an output pixel whose valid taps carry less than a quarter
/// of the kernel mass stays invalid.
inline DepthField bicubic_resize(const DepthField& field, std::size_t out_w, std::size_t out_h) {
  if (out_w == 0 || out_h == 0) throw std::invalid_argument("bicubic_resize: degenerate output size");
  if (field.size() == 0) throw std::invalid_argument("bicubic_resize: empty input");
  const double sx = static_cast<double>(field.width()) / static_cast<double>(out_w);
  const double sy = static_cast<double>(field.height()) / static_cast<double>(out_h);
  DepthField out(out_w, out_h);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const double v = (static_cast<double>(oy) + 0.5) * sy - 0.5;
    const auto y0 = static_cast<std::ptrdiff_t>(std::floor(v));
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double u = (static_cast<double>(ox) + 0.5) * sx - 0.5;
      const auto x0 = static_cast<std::ptrdiff_t>(std::floor(u));
      double acc = 0.0;
      double wsum = 0.0;
      double wabs = 0.0;
      for (std::ptrdiff_t j = y0 - 1; j <= y0 + 2; ++j) {
        const double wy = detail::cubic_weight(v - static_cast<double>(j));
        if (wy == 0.0) continue;
        const auto cy = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(field.height()) - 1));
        for (std::ptrdiff_t i = x0 - 1; i <= x0 + 2; ++i) {
          const double w = wy * detail::cubic_weight(u - static_cast<double>(i));
          if (w == 0.0) continue;
          const auto cx = static_cast<std::size_t>(
              std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(field.width()) - 1));
          if (!field.valid(cx, cy)) continue;
          acc += w * field(cx, cy);
          wsum += w;
          wabs += std::abs(w);
        }
      }
      if (wsum > 0.25 && wabs > 0.0) out.set(ox, oy, detail::keep_positive(acc / wsum));
    }
  }
  return out;
}

/// Output dimensions for a scale change: round(dim * scale), at least 1.
inline std::size_t scaled_dim(std::size_t dim, double scale) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(dim) * scale)));
}

/// Resamples by `scale` (> 1 upsamples, < 1 downsamples). Non-integer
/// scales are supported.
inline DepthField bicubic_resample(const DepthField& field, double scale) {
  if (!(std::isfinite(scale) && scale > 0.0)) throw std::invalid_argument("bicubic_resample: scale must be > 0");
  return bicubic_resize(field, scaled_dim(field.width(), scale), scaled_dim(field.height(), scale));
}

inline DepthField add_gaussian_noise(const DepthField& field, double sigma, std::uint64_t seed) {
  detail::require(std::isfinite(sigma) && sigma >= 0.0, "noise sigma must be >= 0");
  if (sigma == 0.0) return field;
  const CounterRng rng(seed);
  DepthField out = field;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (!field.valid(i)) continue;
    out.set(i, detail::keep_positive(field[i] + sigma * rng.normal(StreamId::DegradeNoise, i)));
  }
  return out;
}

/// Normalised 1-D Gaussian taps sampled at integer offsets.
inline std::vector<double> gaussian_kernel(std::size_t size, double sigma) {
  detail::require(size % 2 == 1, "kernel size must be odd");
  detail::require(std::isfinite(sigma) && sigma > 0.0, "kernel sigma must be > 0");
  const auto r = static_cast<std::ptrdiff_t>(size / 2);
  std::vector<double> k(size);
  double sum = 0.0;
  for (std::ptrdiff_t i = -r; i <= r; ++i) {
    const double w = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

/// Separable Gaussian blur with edge clamp. Invalid pixels are skipped and
/// the kernel renormalised over valid taps; the mask is unchanged.
inline DepthField gaussian_blur(const DepthField& field, std::size_t kernel_size, double sigma) {
  const std::vector<double> k = gaussian_kernel(kernel_size, sigma);
  const auto r = static_cast<std::ptrdiff_t>(kernel_size / 2);
  const std::size_t w = field.width();
  const std::size_t h = field.height();
  const auto W = static_cast<std::ptrdiff_t>(w);
  const auto H = static_cast<std::ptrdiff_t>(h);

  // Horizontal pass keeps (weighted sum, weight) so the vertical pass can
  // renormalise over the same valid taps.
  std::vector<double> hsum(w * h, 0.0), hwt(w * h, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0, wt = 0.0;
      for (std::ptrdiff_t d = -r; d <= r; ++d) {
        const auto cx = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(x) + d, 0, W - 1));
        if (!field.valid(cx, y)) continue;
        const double kw = k[static_cast<std::size_t>(d + r)];
        acc += kw * field(cx, y);
        wt += kw;
      }
      hsum[y * w + x] = acc;
      hwt[y * w + x] = wt;
    }
  }
  DepthField out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!field.valid(x, y)) continue;
      double acc = 0.0, wt = 0.0;
      for (std::ptrdiff_t d = -r; d <= r; ++d) {
        const auto cy = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(y) + d, 0, H - 1));
        const double kw = k[static_cast<std::size_t>(d + r)];
        acc += kw * hsum[cy * w + x];
        wt += kw * hwt[cy * w + x];
      }
      out.set(x, y, detail::keep_positive(acc / wt));
    }
  }
  return out;
}

/// Removes floor(fraction * N_valid) valid pixels, chosen without
/// replacement by seeded keys, and refills each with the mean of its three
/// nearest surviving pixels (Euclidean distance, ties by row-major order).
/// Filled values are never used as sources.
inline DepthField sparsify_and_fill(const DepthField& field, double fraction, std::uint64_t seed) {
  detail::require(fraction >= 0.0 && fraction < 1.0, "removal fraction must lie in [0, 1)");
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < field.size(); ++i)
    if (field.valid(i)) candidates.push_back(i);
  const auto removed_count =
      static_cast<std::size_t>(std::floor(fraction * static_cast<double>(candidates.size())));
  if (removed_count == 0) return field;
  detail::require(candidates.size() - removed_count >= 3, "sparsify needs at least 3 surviving pixels");

  // Sampling without replacement: rank pixels by an order-independent key.
  const CounterRng rng(seed);
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
  keyed.reserve(candidates.size());
  for (std::size_t i : candidates) keyed.emplace_back(rng.bits(StreamId::DegradeSparsify, i), i);
  std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(removed_count), keyed.end());

  Grid<std::uint8_t> survivor(field.width(), field.height(), 0);
  for (std::size_t i : candidates) survivor[i] = 1;
  for (std::size_t n = 0; n < removed_count; ++n) survivor[keyed[n].second] = 0;

  const auto W = static_cast<std::ptrdiff_t>(field.width());
  const auto H = static_cast<std::ptrdiff_t>(field.height());
  DepthField out = field;
  std::vector<std::pair<std::int64_t, std::size_t>> found;
  for (std::size_t n = 0; n < removed_count; ++n) {
    const std::size_t idx = keyed[n].second;
    const auto px = static_cast<std::ptrdiff_t>(idx % field.width());
    const auto py = static_cast<std::ptrdiff_t>(idx / field.width());
    // Grow square rings; once three survivors lie within Euclidean radius r
    // every closer pixel has already been seen.
    found.clear();
    for (std::ptrdiff_t r = 1;; ++r) {
      for (std::ptrdiff_t y = py - r; y <= py + r; ++y) {
        if (y < 0 || y >= H) continue;
        const bool edge_row = (y == py - r || y == py + r);
        for (std::ptrdiff_t x = px - r; x <= px + r; x += edge_row ? 1 : 2 * r) {
          if (x < 0 || x >= W) continue;
          const std::size_t j = static_cast<std::size_t>(y * W + x);
          if (!survivor[j]) continue;
          const std::int64_t d2 = (x - px) * (x - px) + (y - py) * (y - py);
          found.emplace_back(d2, j);
        }
      }
      const std::int64_t r2 = r * r;
      const auto within = std::count_if(found.begin(), found.end(),
                                        [r2](const auto& f) { return f.first <= r2; });
      if (within >= 3 || (r > W && r > H)) break;
    }
    std::partial_sort(found.begin(), found.begin() + 3, found.end());
    const double mean = (field[found[0].second] + field[found[1].second] + field[found[2].second]) / 3.0;
    out.set(idx, mean);
  }
  return out;
}

/// Rounds valid pixels to the nearest multiple of `step`, ties to even.
inline DepthField quantize(const DepthField& field, double step) {
  detail::require(std::isfinite(step) && step >= 0.0, "quantization step must be >= 0");
  if (step == 0.0) return field;
  DepthField out = field;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (!field.valid(i)) continue;
    out.set(i, detail::keep_positive(step * std::nearbyint(field[i] / step)));
  }
  return out;
}

inline DepthField apply_spec(const DepthField& field, const DegradationSpec& spec) {
  spec.validate();
  DepthField d = spec.downsample_factor == 1.0 ? field : bicubic_resample(field, 1.0 / spec.downsample_factor);
  if (spec.noise_sigma > 0.0) d = add_gaussian_noise(d, spec.noise_sigma, spec.seed);
  if (spec.blur) d = gaussian_blur(d, spec.blur->kernel_size, spec.blur->sigma);
  if (spec.removal_fraction > 0.0) d = sparsify_and_fill(d, spec.removal_fraction, spec.seed);
  if (spec.quantization_step > 0.0) d = quantize(d, spec.quantization_step);
  return d;
}

}  // namespace diffdsr
