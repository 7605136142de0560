#pragma once

// Calibration stage: guided refinement of the low-resolution input plus a
// per-pixel standard-deviation estimate of the refinement error.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "diffdsr/degradation.hpp"
#include "diffdsr/depth_field.hpp"
#include "diffdsr/error.hpp"
#include "diffdsr/grid.hpp"
#include "diffdsr/selection.hpp"

namespace diffdsr {

inline constexpr double kSigmaFloor = 1e-3;

struct CalibrationConfig {
  double sigma_scale = 1.0;      // scalar c, normally fitted by fit_sigma_scale
  double range_fraction = 0.1;   // range kernel width / guide dynamic range
  double sigma_floor = kSigmaFloor;

  void validate() const {
    detail::require(std::isfinite(sigma_scale) && sigma_scale > 0.0, "sigma scale must be > 0");
    detail::require(std::isfinite(range_fraction) && range_fraction > 0.0, "range fraction must be > 0");
    detail::require(std::isfinite(sigma_floor) && sigma_floor > 0.0, "sigma floor must be > 0");
  }
};

struct CalibrationOutput {
  DepthField z0_hat;
  ScalarField sigma0_map;
  double sigma_bar = 0.0;
};

namespace detail {

inline double bilinear(const ScalarField& g, double u, double v) {
  const double fx = std::floor(u), fy = std::floor(v);
  const auto x0 = static_cast<std::ptrdiff_t>(fx), y0 = static_cast<std::ptrdiff_t>(fy);
  const double ax = u - fx, ay = v - fy;
  return (1 - ay) * ((1 - ax) * g.clamped(x0, y0) + ax * g.clamped(x0 + 1, y0)) +
         ay * ((1 - ax) * g.clamped(x0, y0 + 1) + ax * g.clamped(x0 + 1, y0 + 1));
}

/// Copy of `low` with invalid pixels replaced by the nearest valid value.
inline DepthField fill_nearest(const DepthField& low) {
  if (low.fully_valid()) return low;
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < low.size(); ++i)
    if (low.valid(i)) valid.push_back(i);
  DepthField out = low;
  const std::size_t w = low.width();
  for (std::size_t i = 0; i < low.size(); ++i) {
    if (low.valid(i)) continue;
    const auto x = static_cast<double>(i % w), y = static_cast<double>(i / w);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = valid.front();
    for (std::size_t j : valid) {
      const double dx = static_cast<double>(j % w) - x, dy = static_cast<double>(j / w) - y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best) {
        best = d2;
        best_j = j;
      }
    }
    out.set(i, low[best_j]);
  }
  return out;
}

}  // namespace detail

/// Joint-bilateral upsampling of `low` to the guide's resolution.
///
/// The spatial kernel is a tent whose half-width equals the upsampling
/// factor (one low-resolution pixel), so each output mixes at most the 2x2
/// surrounding samples; the range kernel is a Gaussian on guide differences
/// with width `range_fraction` times the guide's dynamic range. When no
/// valid sample falls inside the tent, the nearest valid sample is used.
inline DepthField joint_bilateral_upsample(const ScalarField& guide, const DepthField& low,
                                           double range_fraction) {
  detail::require(low.valid_count() > 0, "joint bilateral upsample: input has no valid pixel");
  const std::size_t W = guide.width(), H = guide.height();
  const double fx = static_cast<double>(W) / static_cast<double>(low.width());
  const double fy = static_cast<double>(H) / static_cast<double>(low.height());
  const auto [gmin, gmax] = std::minmax_element(guide.begin(), guide.end());
  const double range = std::max(*gmax - *gmin, 1e-12);
  const double sigma_r = range_fraction * range;
  const double inv2r = 1.0 / (2.0 * sigma_r * sigma_r);

  // Guide sampled at each low-resolution pixel centre.
  ScalarField guide_low(low.width(), low.height());
  for (std::size_t j = 0; j < low.height(); ++j)
    for (std::size_t i = 0; i < low.width(); ++i)
      guide_low(i, j) = detail::bilinear(guide, (static_cast<double>(i) + 0.5) * fx - 0.5,
                                         (static_cast<double>(j) + 0.5) * fy - 0.5);

  const DepthField filled = detail::fill_nearest(low);
  const auto LW = static_cast<std::ptrdiff_t>(low.width());
  const auto LH = static_cast<std::ptrdiff_t>(low.height());
  DepthField out(W, H);
  for (std::size_t y = 0; y < H; ++y) {
    const double v = (static_cast<double>(y) + 0.5) / fy - 0.5;
    const auto j0 = static_cast<std::ptrdiff_t>(std::floor(v));
    for (std::size_t x = 0; x < W; ++x) {
      const double u = (static_cast<double>(x) + 0.5) / fx - 0.5;
      const auto i0 = static_cast<std::ptrdiff_t>(std::floor(u));
      const double g = guide(x, y);
      double acc = 0.0, wsum = 0.0;
      for (std::ptrdiff_t j = j0; j <= j0 + 1; ++j) {
        if (j < 0 || j >= LH) continue;
        const double wy = 1.0 - std::abs(v - static_cast<double>(j));
        if (wy <= 0.0) continue;
        for (std::ptrdiff_t i = i0; i <= i0 + 1; ++i) {
          if (i < 0 || i >= LW) continue;
          const auto li = static_cast<std::size_t>(i), lj = static_cast<std::size_t>(j);
          if (!low.valid(li, lj)) continue;
          const double wx = 1.0 - std::abs(u - static_cast<double>(i));
          if (wx <= 0.0) continue;
          const double dg = g - guide_low(li, lj);
          const double w = wx * wy * std::exp(-dg * dg * inv2r);
          acc += w * low(li, lj);
          wsum += w;
        }
      }
      if (wsum > 0.0) {
        out.set(x, y, acc / wsum);
      } else {
        const auto li = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(std::lround(u), 0, LW - 1));
        const auto lj = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(std::lround(v), 0, LH - 1));
        out.set(x, y, filled(li, lj));
      }
    }
  }
  return out;
}

/// Window half-size for the residual statistic: ceil(factor / 2).
inline std::size_t residual_window_radius(double factor) {
  return static_cast<std::size_t>(std::ceil(std::max(factor, 1.0) / 2.0));
}

/// sqrt(pi/2) times the windowed mean absolute difference between the
/// refined estimate and a plain bicubic upsample (window (2k+1)^2,
/// truncated at the borders).
inline ScalarField residual_statistic(const DepthField& refined, const DepthField& reference,
                                      std::size_t radius) {
  if (!refined.same_shape(reference)) throw std::invalid_argument("residual_statistic: shape mismatch");
  const std::size_t W = refined.width(), H = refined.height();
  // Summed-area table of |refined - reference|.
  std::vector<double> sat((W + 1) * (H + 1), 0.0);
  for (std::size_t y = 0; y < H; ++y) {
    double row = 0.0;
    for (std::size_t x = 0; x < W; ++x) {
      row += std::abs(refined(x, y) - reference(x, y));
      sat[(y + 1) * (W + 1) + (x + 1)] = sat[y * (W + 1) + (x + 1)] + row;
    }
  }
  const double gauss = std::sqrt(std::numbers::pi / 2.0);
  ScalarField out(W, H);
  for (std::size_t y = 0; y < H; ++y) {
    const std::size_t y0 = y >= radius ? y - radius : 0, y1 = std::min(H, y + radius + 1);
    for (std::size_t x = 0; x < W; ++x) {
      const std::size_t x0 = x >= radius ? x - radius : 0, x1 = std::min(W, x + radius + 1);
      const double sum = sat[y1 * (W + 1) + x1] - sat[y0 * (W + 1) + x1] -
                         sat[y1 * (W + 1) + x0] + sat[y0 * (W + 1) + x0];
      const double area = static_cast<double>((x1 - x0) * (y1 - y0));
      out(x, y) = gauss * std::max(sum, 0.0) / area;
    }
  }
  return out;
}

/// Refined estimate and raw (unscaled) residual statistic.
struct RefinementResult {
  DepthField z0_hat;
  ScalarField raw_sigma;
};

inline RefinementResult refine(const ScalarField& guide, const DepthField& d_in, double range_fraction) {
  detail::require(d_in.size() > 0, "calibrate: empty low-resolution input");
  if (d_in.valid_count() == 0) throw std::invalid_argument("calibrate: input has no valid pixel");
  detail::require(guide.width() >= d_in.width() && guide.height() >= d_in.height(),
                  "calibrate: guide resolution below input resolution");
  RefinementResult r;
  r.z0_hat = joint_bilateral_upsample(guide, d_in, range_fraction);
  const DepthField reference = bicubic_resize(detail::fill_nearest(d_in), guide.width(), guide.height());
  const double factor = std::max(static_cast<double>(guide.width()) / static_cast<double>(d_in.width()),
                                 static_cast<double>(guide.height()) / static_cast<double>(d_in.height()));
  r.raw_sigma = residual_statistic(r.z0_hat, reference, residual_window_radius(factor));
  return r;
}

inline ScalarField scale_sigma(const ScalarField& raw, double scale, double floor) {
  ScalarField s(raw.width(), raw.height());
  for (std::size_t i = 0; i < raw.size(); ++i) s[i] = std::max(scale * raw[i], floor);
  return s;
}

inline CalibrationOutput calibrate(const ScalarField& guide, const DepthField& d_in,
                                   const CalibrationConfig& config) {
  config.validate();
  RefinementResult r = refine(guide, d_in, config.range_fraction);
  CalibrationOutput out;
  out.z0_hat = std::move(r.z0_hat);
  out.sigma0_map = scale_sigma(r.raw_sigma, config.sigma_scale, config.sigma_floor);
  out.sigma_bar = sigma_bar(out.sigma0_map);
  return out;
}

/// Mean over pixels of log s^2 + (z0 - z)^2 / s^2.
inline double nll_loss(std::span<const double> z0_hat, std::span<const double> sigma0,
                       std::span<const double> z_gt) {
  if (z0_hat.size() != sigma0.size() || z0_hat.size() != z_gt.size())
    throw std::invalid_argument("nll_loss: shape mismatch");
  if (z0_hat.empty()) throw std::invalid_argument("nll_loss: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < z0_hat.size(); ++i) {
    const double s2 = sigma0[i] * sigma0[i];
    const double r = z0_hat[i] - z_gt[i];
    sum += std::log(s2) + r * r / s2;
  }
  return sum / static_cast<double>(z0_hat.size());
}

struct CalibrationSample {
  std::vector<double> z0_hat;
  std::vector<double> raw_sigma;
  std::vector<double> z_gt;
};

/// Scalar c minimising the corpus-mean NLL with sigma = max(c * raw, floor),
/// by golden-section search on log c over [1e-3, 1e3]. A flat objective
/// converges to the lower bound.
inline double fit_sigma_scale(std::span<const CalibrationSample> corpus, double floor = kSigmaFloor) {
  if (corpus.empty()) throw std::invalid_argument("fit_sigma_scale: empty corpus");
  std::size_t total = 0;
  for (const auto& s : corpus) {
    if (s.z0_hat.size() != s.raw_sigma.size() || s.z0_hat.size() != s.z_gt.size())
      throw std::invalid_argument("fit_sigma_scale: shape mismatch");
    total += s.z0_hat.size();
  }
  if (total == 0) throw std::invalid_argument("fit_sigma_scale: empty corpus");

  auto objective = [&](double log_c) {
    const double c = std::exp(log_c);
    double sum = 0.0;
    for (const auto& s : corpus) {
      for (std::size_t i = 0; i < s.z0_hat.size(); ++i) {
        const double sigma = std::max(c * s.raw_sigma[i], floor);
        const double s2 = sigma * sigma;
        const double r = s.z0_hat[i] - s.z_gt[i];
        sum += std::log(s2) + r * r / s2;
      }
    }
    return sum / static_cast<double>(total);
  };

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(1e-3), b = std::log(1e3);
  double c1 = b - inv_phi * (b - a), c2 = a + inv_phi * (b - a);
  double f1 = objective(c1), f2 = objective(c2);
  while (b - a > 1e-9) {
    if (f1 <= f2) {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - inv_phi * (b - a);
      f1 = objective(c1);
    } else {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + inv_phi * (b - a);
      f2 = objective(c2);
    }
  }
  return std::exp(0.5 * (a + b));
}

/// Mean absolute error over pixels valid in both fields.
inline double l_d_loss(const DepthField& d_hat, const DepthField& d_gt) {
  if (!d_hat.same_shape(d_gt)) throw std::invalid_argument("l_d_loss: shape mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < d_gt.size(); ++i) {
    if (!d_gt.valid(i) || !d_hat.valid(i)) continue;
    sum += std::abs(d_hat[i] - d_gt[i]);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("l_d_loss: empty mask");
  return sum / static_cast<double>(n);
}

}  // namespace diffdsr
