#pragma once

// Noise injection at the selected timestep and one-step denoising.
//
// The learned components (noise proposal network, pre-trained one-step
// denoiser, latent codec) sit behind small interfaces; the implementations
// here are closed-form oracles that keep every stage testable.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "diffdsr/depth_field.hpp"
#include "diffdsr/distributions.hpp"
#include "diffdsr/error.hpp"
#include "diffdsr/grid.hpp"
#include "diffdsr/rng.hpp"

namespace diffdsr {

struct NoiseScales {
  std::vector<double> mean;   // sqrt(a) * z0_hat
  std::vector<double> noise;  // sqrt(a * sigma0^2 + 1 - a), per pixel
};

inline NoiseScales mean_and_noise_scales(std::span<const double> z0_hat,
                                         std::span<const double> sigma0, double alpha_bar) {
  if (z0_hat.size() != sigma0.size())
    throw std::invalid_argument("mean_and_noise_scales: shape mismatch");
  detail::require_alpha(alpha_bar);
  NoiseScales s;
  s.mean.resize(z0_hat.size());
  s.noise.resize(z0_hat.size());
  const double root = std::sqrt(alpha_bar);
  for (std::size_t i = 0; i < z0_hat.size(); ++i) {
    s.mean[i] = root * z0_hat[i];
    s.noise[i] = std::sqrt(alpha_bar * sigma0[i] * sigma0[i] + (1.0 - alpha_bar));
  }
  return s;
}

struct NoisyLatent {
  std::vector<double> values;
  std::size_t timestep = 1;
  double alpha_bar = 1.0;
  std::vector<double> mean_scale;
  std::vector<double> noise_scale;
  std::uint64_t seed = 0;  // seed the epsilon field was drawn from

  std::size_t size() const noexcept { return values.size(); }
};

/// values = mean + noise * epsilon, element-wise.
inline NoisyLatent inject_noise(NoiseScales scales, std::span<const double> epsilon,
                                std::size_t timestep, double alpha_bar, std::uint64_t seed) {
  if (scales.mean.size() != scales.noise.size() || scales.mean.size() != epsilon.size())
    throw std::invalid_argument("inject_noise: shape mismatch");
  detail::require_alpha(alpha_bar);
  NoisyLatent z;
  z.values.resize(epsilon.size());
  for (std::size_t i = 0; i < epsilon.size(); ++i) {
    detail::require(std::isfinite(epsilon[i]), "inject_noise: epsilon must be finite");
    z.values[i] = scales.mean[i] + scales.noise[i] * epsilon[i];
  }
  z.timestep = timestep;
  z.alpha_bar = alpha_bar;
  z.mean_scale = std::move(scales.mean);
  z.noise_scale = std::move(scales.noise);
  z.seed = seed;
  return z;
}

/// Unit Gaussian field keyed by (seed, stream, pixel index).
inline std::vector<double> gaussian_field(std::size_t n, std::uint64_t seed,
                                          StreamId stream = StreamId::NoiseProposal) {
  const CounterRng rng(seed);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = rng.normal(stream, i);
  return out;
}

/// guide minus its (2r+1)^2 edge-clamped box mean.
inline ScalarField highpass(const ScalarField& guide, std::size_t radius) {
  const std::size_t W = guide.width(), H = guide.height();
  ScalarField out(W, H);
  if (guide.size() == 0) return out;
  // Summed-area table over the clamp-padded guide.
  const std::size_t P = W + 2 * radius, Q = H + 2 * radius;
  std::vector<double> sat((P + 1) * (Q + 1), 0.0);
  const auto r = static_cast<std::ptrdiff_t>(radius);
  for (std::size_t y = 0; y < Q; ++y) {
    double row = 0.0;
    for (std::size_t x = 0; x < P; ++x) {
      row += guide.clamped(static_cast<std::ptrdiff_t>(x) - r, static_cast<std::ptrdiff_t>(y) - r);
      sat[(y + 1) * (P + 1) + x + 1] = sat[y * (P + 1) + x + 1] + row;
    }
  }
  const std::size_t side = 2 * radius + 1;
  const double area = static_cast<double>(side * side);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double sum = sat[(y + side) * (P + 1) + x + side] - sat[y * (P + 1) + x + side] -
                         sat[(y + side) * (P + 1) + x] + sat[y * (P + 1) + x];
      out(x, y) = guide(x, y) - sum / area;
    }
  return out;
}

/// Produces the epsilon field placed on top of the mean scale.
class NoiseProposal {
 public:
  virtual ~NoiseProposal() = default;
  virtual std::vector<double> propose(const ScalarField& guide, const NoiseScales& scales,
                                      std::uint64_t seed) const = 0;
};

/// Seeded Gaussian draw plus a guide-aligned residual:
///   eps = (g + kappa * h) / sqrt(1 + kappa^2)
/// where h is the guide high-pass, centred and scaled to unit RMS. The
/// result has unit second moment and kappa = 0 returns g unchanged.
class GuidedResidualProposal final : public NoiseProposal {
 public:
  explicit GuidedResidualProposal(double kappa = 1.0, std::size_t radius = 16)
      : kappa_(kappa), radius_(radius) {
    detail::require(std::isfinite(kappa) && kappa >= 0.0, "kappa must be finite and >= 0");
  }

  double kappa() const noexcept { return kappa_; }

  std::vector<double> propose(const ScalarField& guide, const NoiseScales& scales,
                              std::uint64_t seed) const override {
    const std::size_t n = guide.size();
    if (scales.mean.size() != n || scales.noise.size() != n)
      throw std::invalid_argument("noise_proposal: shape mismatch");
    std::vector<double> eps = gaussian_field(n, seed, StreamId::NoiseProposal);
    if (kappa_ == 0.0 || n == 0) return eps;

    ScalarField h = highpass(guide, radius_);
    double mean = 0.0;
    for (double v : h) mean += v;
    mean /= static_cast<double>(n);
    double sq = 0.0;
    for (double& v : h) {
      v -= mean;
      sq += v * v;
    }
    const double rms = std::sqrt(sq / static_cast<double>(n));
    if (!(rms > 1e-12)) return eps;  // featureless guide

    const double norm = std::sqrt(1.0 + kappa_ * kappa_);
    for (std::size_t i = 0; i < n; ++i) eps[i] = (eps[i] + kappa_ * h[i] / rms) / norm;
    return eps;
  }

 private:
  double kappa_;
  std::size_t radius_;
};

inline std::vector<double> noise_proposal(const ScalarField& guide, const NoiseScales& scales,
                                          std::uint64_t seed, double kappa = 1.0, std::size_t radius = 16) {
  return GuidedResidualProposal(kappa, radius).propose(guide, scales, seed);
}

// ---------------------------------------------------------------------------
// Closed-form posterior-mean denoisers.
//
// Both assume the standard forward model z_t = sqrt(a) z + sqrt(1 - a) eps.

struct GaussianPrior {
  std::vector<double> mean;  // one entry (broadcast) or one per pixel
  double sigma = 1.0;

  void validate(std::size_t n) const {
    detail::require(mean.size() == 1 || mean.size() == n, "gaussian prior mean has wrong length");
    detail::require(std::isfinite(sigma) && sigma >= 0.0, "gaussian prior sigma must be >= 0");
  }
  double mean_at(std::size_t i) const { return mean.size() == 1 ? mean[0] : mean[i]; }
};

struct MixtureComponent {
  double weight = 1.0;
  double mean = 0.0;
  double sigma = 1.0;
};

struct MixturePrior {
  std::vector<MixtureComponent> components;

  void validate() const {
    detail::require(!components.empty(), "mixture prior needs at least one component");
    double total = 0.0;
    for (const auto& c : components) {
      detail::require(std::isfinite(c.weight) && c.weight > 0.0, "mixture weights must be > 0");
      detail::require(std::isfinite(c.mean), "mixture means must be finite");
      detail::require(std::isfinite(c.sigma) && c.sigma >= 0.0, "mixture sigmas must be >= 0");
      total += c.weight;
    }
    detail::require(std::abs(total - 1.0) <= 1e-12, "mixture weights must sum to 1");
  }
};

namespace detail {

/// E[z | z_t] for z ~ N(mu, s^2), with a < 1.
inline double gaussian_posterior_mean(double z_t, double mu, double s, double alpha_bar) {
  const double root = std::sqrt(alpha_bar);
  const double var = alpha_bar * s * s + (1.0 - alpha_bar);
  return mu + (root * s * s / var) * (z_t - root * mu);
}

}  // namespace detail

inline std::vector<double> denoise_gaussian_posterior(const GaussianPrior& prior,
                                                      const NoisyLatent& noisy) {
  detail::require_alpha(noisy.alpha_bar);
  prior.validate(noisy.size());
  if (noisy.alpha_bar == 1.0) return noisy.values;  // nothing to remove
  std::vector<double> out(noisy.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = detail::gaussian_posterior_mean(noisy.values[i], prior.mean_at(i), prior.sigma,
                                             noisy.alpha_bar);
  return out;
}

/// Per-pixel posterior mean under a scalar Gaussian mixture; component
/// responsibilities are normalised in log space.
inline std::vector<double> denoise_mixture_posterior(const MixturePrior& prior,
                                                     const NoisyLatent& noisy) {
  detail::require_alpha(noisy.alpha_bar);
  prior.validate();
  if (noisy.alpha_bar == 1.0) return noisy.values;
  const double a = noisy.alpha_bar;
  const double root = std::sqrt(a);
  const std::size_t k = prior.components.size();
  std::vector<double> log_w(k), var(k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto& c = prior.components[j];
    var[j] = a * c.sigma * c.sigma + (1.0 - a);
    log_w[j] = std::log(c.weight) - 0.5 * std::log(2.0 * std::numbers::pi * var[j]);
  }
  std::vector<double> logits(k);
  std::vector<double> out(noisy.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double zt = noisy.values[i];
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      const double r = zt - root * prior.components[j].mean;
      logits[j] = log_w[j] - 0.5 * r * r / var[j];
      peak = std::max(peak, logits[j]);
    }
    double norm = 0.0;
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const auto& c = prior.components[j];
      const double w = std::exp(logits[j] - peak);
      norm += w;
      acc += w * detail::gaussian_posterior_mean(zt, c.mean, c.sigma, a);
    }
    out[i] = acc / norm;
  }
  return out;
}

/// One-step denoiser contract: (guide, noisy latent, timestep) -> clean latent.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual std::vector<double> denoise(const ScalarField& guide, const NoisyLatent& noisy) const = 0;
};

class GaussianPosteriorDenoiser final : public Denoiser {
 public:
  explicit GaussianPosteriorDenoiser(GaussianPrior prior) : prior_(std::move(prior)) {}
  std::vector<double> denoise(const ScalarField&, const NoisyLatent& noisy) const override {
    return denoise_gaussian_posterior(prior_, noisy);
  }

 private:
  GaussianPrior prior_;
};

class MixturePosteriorDenoiser final : public Denoiser {
 public:
  explicit MixturePosteriorDenoiser(MixturePrior prior) : prior_(std::move(prior)) {
    prior_.validate();
  }
  std::vector<double> denoise(const ScalarField&, const NoisyLatent& noisy) const override {
    return denoise_mixture_posterior(prior_, noisy);
  }

 private:
  MixturePrior prior_;
};

/// Depth <-> latent mapping.
class LatentCodec {
 public:
  virtual ~LatentCodec() = default;
  virtual std::vector<double> encode(const DepthField& depth) const = 0;
  virtual DepthField decode(std::span<const double> latent, std::size_t width,
                            std::size_t height) const = 0;
};

/// Latent space equals pixel space (meters).
class IdentityCodec final : public LatentCodec {
 public:
  static constexpr double kMinDepth = 1e-6;

  std::vector<double> encode(const DepthField& depth) const override {
    return depth.values().values();
  }
  DepthField decode(std::span<const double> latent, std::size_t width,
                    std::size_t height) const override {
    if (latent.size() != width * height) throw std::invalid_argument("decode: shape mismatch");
    ScalarField depth(width, height);
    // finite non-positive latents clamp to kMinDepth
    for (std::size_t i = 0; i < latent.size(); ++i)
      depth[i] = std::isfinite(latent[i]) ? std::max(latent[i], kMinDepth) : latent[i];
    return DepthField(std::move(depth));
  }
};

}  // namespace diffdsr
