#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffdsr/depth_field.hpp"

namespace diffdsr {

inline constexpr double kDeltaThreshold = 1.05;

struct MetricReport {
  double rmse = 0.0;
  double mae = 0.0;
  double delta_105 = 0.0;
  std::size_t valid_count = 0;
  std::size_t nonfinite_pred = 0;  // gt-valid pixels dropped for a non-finite prediction
  std::string scene_id;
  std::string config_hash;
};

/// RMSE, MAE and delta_1.05 over pixels valid in `gt` whose prediction is
/// finite.
inline MetricReport compute_metrics(const DepthField& pred, const DepthField& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("compute_metrics: shape mismatch");
  double sq = 0.0, ab = 0.0;
  std::size_t n = 0, hits = 0, dropped = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt.valid(i)) continue;
    const double p = pred.values()[i];
    if (!std::isfinite(p)) {
      ++dropped;
      continue;
    }
    const double d = p - gt[i];
    sq += d * d;
    ab += std::abs(d);
    if (p > 0.0 && std::max(p / gt[i], gt[i] / p) < kDeltaThreshold) ++hits;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("compute_metrics: empty valid set");
  MetricReport r;
  const double dn = static_cast<double>(n);
  r.rmse = std::sqrt(sq / dn);
  r.mae = ab / dn;
  // Guard the power-mean ordering against last-ulp rounding.
  r.rmse = std::max(r.rmse, r.mae);
  r.delta_105 = static_cast<double>(hits) / dn;
  r.valid_count = n;
  r.nonfinite_pred = dropped;
  return r;
}

/// Corpus means weighted by valid_count.
inline MetricReport aggregate(std::span<const MetricReport> reports) {
  MetricReport out;
  out.scene_id = "corpus";
  double w = 0.0;
  for (const auto& r : reports) {
    const double n = static_cast<double>(r.valid_count);
    out.rmse += n * r.rmse;
    out.mae += n * r.mae;
    out.delta_105 += n * r.delta_105;
    out.valid_count += r.valid_count;
    out.nonfinite_pred += r.nonfinite_pred;
    w += n;
  }
  if (w > 0.0) {
    out.rmse /= w;
    out.mae /= w;
    out.delta_105 /= w;
  }
  if (!reports.empty()) out.config_hash = reports.front().config_hash;
  return out;
}

/// Mean squared latent error plus mean absolute depth error, each over
/// `mask`.
inline double rec_loss(std::span<const double> z_hat, std::span<const double> z_gt,
                       std::span<const double> d_hat, std::span<const double> d_gt,
                       std::span<const std::uint8_t> mask) {
  const std::size_t n = mask.size();
  if (z_hat.size() != n || z_gt.size() != n || d_hat.size() != n || d_gt.size() != n)
    throw std::invalid_argument("rec_loss: shape mismatch");
  double sq = 0.0, ab = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double dz = z_hat[i] - z_gt[i];
    sq += dz * dz;
    ab += std::abs(d_hat[i] - d_gt[i]);
    ++count;
  }
  if (count == 0) throw std::invalid_argument("rec_loss: empty mask");
  return sq / static_cast<double>(count) + ab / static_cast<double>(count);
}

/// Forward-difference gradient loss: mean |dx(pred) - dx(gt)| over valid
/// horizontal pairs plus mean |dy(pred) - dy(gt)| over valid vertical pairs.
/// A pair counts only when both pixels are in `mask`.
inline double grad_loss(const ScalarField& d_hat, const ScalarField& d_gt, const Grid<std::uint8_t>& mask) {
  if (!d_hat.same_shape(d_gt) || !d_hat.same_shape(mask)) throw std::invalid_argument("grad_loss: shape mismatch");
  const std::size_t W = d_hat.width(), H = d_hat.height();
  double sx = 0.0, sy = 0.0;
  std::size_t nx = 0, ny = 0;
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      if (!mask(x, y)) continue;
      if (x + 1 < W && mask(x + 1, y)) {
        sx += std::abs((d_hat(x + 1, y) - d_hat(x, y)) - (d_gt(x + 1, y) - d_gt(x, y)));
        ++nx;
      }
      if (y + 1 < H && mask(x, y + 1)) {
        sy += std::abs((d_hat(x, y + 1) - d_hat(x, y)) - (d_gt(x, y + 1) - d_gt(x, y)));
        ++ny;
      }
    }
  }
  if (nx == 0 && ny == 0) throw std::invalid_argument("grad_loss: no valid difference pairs");
  return (nx ? sx / static_cast<double>(nx) : 0.0) + (ny ? sy / static_cast<double>(ny) : 0.0);
}

}  // namespace diffdsr
