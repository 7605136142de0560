#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffdsr/error.hpp"

namespace diffdsr {

enum class ScheduleKind { Linear };

struct ScheduleParams {
  ScheduleKind kind = ScheduleKind::Linear;
  std::size_t steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

/// Discrete variance-preserving noise schedule.
///
/// Timesteps are 1-based: `alpha_bar(t)` is the product of (1 - beta_s) for
/// s = 1..t. The sequence is built once in double precision and is
/// immutable afterwards.
class NoiseSchedule {
 public:
  /// Linear betas from `beta_start` to `beta_end` inclusive.
  static NoiseSchedule linear(std::size_t steps, double beta_start, double beta_end) {
    detail::require(steps >= 1, "schedule needs at least one timestep");
    detail::require(std::isfinite(beta_start) && std::isfinite(beta_end),
                    "schedule bounds must be finite");
    detail::require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
                    "schedule bounds must satisfy 0 < beta_start <= beta_end < 1");
    std::vector<double> betas(steps);
    for (std::size_t i = 0; i < steps; ++i) {
      const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
      betas[i] = beta_start + (beta_end - beta_start) * frac;
    }
    return NoiseSchedule(std::move(betas));
  }

  static NoiseSchedule from_params(const ScheduleParams& p) {
    switch (p.kind) {
      case ScheduleKind::Linear:
        return linear(p.steps, p.beta_start, p.beta_end);
    }
    throw std::invalid_argument("unknown schedule kind");
  }

  /// Takes an explicit beta sequence; checked against the schedule invariants.
  explicit NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
    detail::require(!betas_.empty(), "schedule needs at least one timestep");
    alpha_bars_.resize(betas_.size());
    double running = 1.0;
    for (std::size_t i = 0; i < betas_.size(); ++i) {
      const double b = betas_[i];
      detail::require(std::isfinite(b) && b > 0.0 && b < 1.0, "beta out of (0, 1)");
      detail::require(i == 0 || b >= betas_[i - 1], "betas must be non-decreasing");
      running *= 1.0 - b;
      alpha_bars_[i] = running;
      detail::require(i == 0 || alpha_bars_[i] < alpha_bars_[i - 1],
                      "alpha_bar must be strictly decreasing");
    }
    detail::require(alpha_bars_.back() > 0.0, "alpha_bar underflowed to zero");
  }

  std::size_t steps() const noexcept { return betas_.size(); }

  double beta(std::size_t t) const { return betas_.at(index(t)); }
  double alpha_bar(std::size_t t) const { return alpha_bars_.at(index(t)); }

  /// Zero-based view: element i holds alpha_bar(i + 1).
  std::span<const double> alpha_bars() const noexcept { return alpha_bars_; }
  std::span<const double> betas() const noexcept { return betas_; }

  /// Timestep whose alpha_bar is nearest to `target_alpha`; an exact tie
  /// resolves to the larger (noisier) timestep.
  std::size_t timestep_for(double target_alpha) const {
    detail::require(target_alpha > 0.0 && target_alpha <= 1.0, "target alpha must lie in (0, 1]");
    // alpha_bars_ is strictly decreasing: find the first entry <= target.
    std::size_t lo = 0;
    std::size_t hi = alpha_bars_.size();
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (alpha_bars_[mid] <= target_alpha) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    if (lo == 0) return 1;
    if (lo == alpha_bars_.size()) return alpha_bars_.size();
    const double above = alpha_bars_[lo - 1] - target_alpha;
    const double below = target_alpha - alpha_bars_[lo];
    return below <= above ? lo + 1 : lo;
  }

 private:
  std::size_t index(std::size_t t) const {
    if (t < 1 || t > betas_.size()) throw std::out_of_range("timestep out of range");
    return t - 1;
  }

  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

inline std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Linear:
      return "linear";
  }
  return "unknown";
}

}  // namespace diffdsr
