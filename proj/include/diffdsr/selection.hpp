#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "diffdsr/error.hpp"
#include "diffdsr/grid.hpp"
#include "diffdsr/schedule.hpp"

namespace diffdsr {

enum class SelectionRule { Simplified, Threshold };

inline std::string to_string(SelectionRule rule) {
  return rule == SelectionRule::Simplified ? "simplified" : "threshold";
}

inline SelectionRule parse_selection_rule(std::string_view text) {
  if (text == "simplified") return SelectionRule::Simplified;
  if (text == "threshold") return SelectionRule::Threshold;
  throw std::invalid_argument("unknown selection rule '" + std::string(text) + "'");
}

struct SelectionConfig {
  double tau = 0.14;
  double alpha_min = 0.0;  // 0 until bound to a schedule, see for_schedule()
  SelectionRule rule = SelectionRule::Simplified;

  /// Defaults with alpha_min pinned to the fully-noised end of `schedule`.
  static SelectionConfig for_schedule(const NoiseSchedule& schedule) {
    SelectionConfig c;
    c.alpha_min = schedule.alpha_bar(schedule.steps());
    return c;
  }

  void validate() const {
    detail::require(std::isfinite(tau) && tau > 0.0, "tau must be > 0");
    detail::require(alpha_min > 0.0 && alpha_min < 1.0, "alpha_min must lie in (0, 1)");
  }
};

/// Continuous alpha target for a mean uncertainty, clamped to [alpha_min, 1].
inline double select_alpha(double sigma_bar, const SelectionConfig& config) {
  config.validate();
  if (!(std::isfinite(sigma_bar) && sigma_bar > 0.0))
    throw std::invalid_argument("sigma_bar must be finite and > 0");
  const double ratio = config.tau / sigma_bar;
  const double target = config.rule == SelectionRule::Simplified ? ratio : ratio * ratio;
  return std::clamp(target, config.alpha_min, 1.0);
}

inline constexpr double kSigmaBarFloor = 1e-6;

/// Spatial mean of a per-pixel standard-deviation map, floored at 1e-6.
inline double sigma_bar(const ScalarField& sigma_map) {
  if (sigma_map.empty()) throw std::invalid_argument("sigma map is empty");
  long double sum = 0.0L;
  for (double s : sigma_map) {
    if (!(std::isfinite(s) && s >= 0.0))
      throw std::invalid_argument("sigma map entries must be finite and >= 0");
    sum += s;
  }
  return std::max(static_cast<double>(sum / static_cast<long double>(sigma_map.size())), kSigmaBarFloor);
}

struct TimestepChoice {
  std::size_t timestep = 1;
  double alpha_bar = 1.0;     // the schedule value actually used downstream
  double target_alpha = 1.0;  // continuous rule output before snapping
};

inline TimestepChoice select_timestep(double sigma_bar, const SelectionConfig& config,
                                      const NoiseSchedule& schedule) {
  TimestepChoice c;
  c.target_alpha = select_alpha(sigma_bar, config);
  c.timestep = schedule.timestep_for(c.target_alpha);
  c.alpha_bar = schedule.alpha_bar(c.timestep);
  return c;
}

}  // namespace diffdsr
