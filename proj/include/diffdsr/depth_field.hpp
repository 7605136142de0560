#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "diffdsr/grid.hpp"

namespace diffdsr {

/// Metric depth map (meters) with a validity mask.
///
/// A pixel is valid iff its value is finite and strictly positive; invalid
/// pixels always hold a quiet NaN so the mask and the values cannot drift
/// apart.
class DepthField {
 public:
  DepthField() = default;

  DepthField(std::size_t width, std::size_t height, double fill = kInvalid)
      : depth_(width, height, fill), valid_(width, height, 0) {
    refresh_mask();
  }

  /// Builds a field from raw values; non-finite or non-positive entries
  /// become invalid.
  explicit DepthField(ScalarField values) : depth_(std::move(values)) {
    valid_ = Grid<std::uint8_t>(depth_.width(), depth_.height(), 0);
    refresh_mask();
  }

  static constexpr double kInvalid = std::numeric_limits<double>::quiet_NaN();

  std::size_t width() const noexcept { return depth_.width(); }
  std::size_t height() const noexcept { return depth_.height(); }
  std::size_t size() const noexcept { return depth_.size(); }

  double operator[](std::size_t i) const { return depth_[i]; }
  double operator()(std::size_t x, std::size_t y) const { return depth_(x, y); }
  bool valid(std::size_t i) const { return valid_[i] != 0; }
  bool valid(std::size_t x, std::size_t y) const { return valid_(x, y) != 0; }

  /// Sets a pixel; non-finite or non-positive values mark it invalid.
  void set(std::size_t i, double value) {
    if (std::isfinite(value) && value > 0.0) {
      depth_[i] = value;
      valid_[i] = 1;
    } else {
      depth_[i] = kInvalid;
      valid_[i] = 0;
    }
  }
  void set(std::size_t x, std::size_t y, double value) { set(y * width() + x, value); }
  void invalidate(std::size_t i) { set(i, kInvalid); }

  const ScalarField& values() const noexcept { return depth_; }
  const Grid<std::uint8_t>& mask() const noexcept { return valid_; }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid_) n += v;
    return n;
  }
  bool fully_valid() const { return valid_count() == size(); }

  template <typename U>
  bool same_shape(const Grid<U>& g) const noexcept {
    return width() == g.width() && height() == g.height();
  }
  bool same_shape(const DepthField& f) const noexcept {
    return width() == f.width() && height() == f.height();
  }

  /// Bitwise equality of values (NaN payloads included) and masks.
  friend bool operator==(const DepthField& a, const DepthField& b) {
    if (!a.same_shape(b) || a.valid_ != b.valid_) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a.valid(i) && a.depth_[i] != b.depth_[i]) return false;
    }
    return true;
  }

 private:
  void refresh_mask() {
    for (std::size_t i = 0; i < depth_.size(); ++i) set(i, depth_[i]);
  }

  ScalarField depth_;
  Grid<std::uint8_t> valid_;
};

}  // namespace diffdsr
