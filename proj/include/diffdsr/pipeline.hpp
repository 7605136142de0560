#pragma once

// Per-scene orchestration: calibrate -> select timestep -> mean/noise
// scales -> noise proposal -> inject -> denoise -> decode -> metrics.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "diffdsr/calibration.hpp"
#include "diffdsr/config.hpp"
#include "diffdsr/depth_field.hpp"
#include "diffdsr/error.hpp"
#include "diffdsr/evaluation.hpp"
#include "diffdsr/rng.hpp"
#include "diffdsr/sampling.hpp"
#include "diffdsr/schedule.hpp"
#include "diffdsr/selection.hpp"

namespace diffdsr {

struct SceneInput {
  std::string id;
  std::size_t index = 0;
  DepthField gt;
  ScalarField guide;
  DepthField low;  // degraded low-resolution input
};

struct SceneOutcome {
  DepthField prediction;
  MetricReport report;
  TimestepChoice choice;  // timestep 0 for the no-diffusion variant
  double sigma_bar = 0.0;
};

/// Seeds below are pure functions of (run seed, scene index, label).
namespace seeds {

inline std::uint64_t scene_layout(std::uint64_t run_seed, std::size_t index) {
  return derive_seed(derive_seed(run_seed, 0x5CE7E), index);
}

inline std::uint64_t degradation(std::uint64_t run_seed, std::uint64_t salt, std::size_t index) {
  return derive_seed(derive_seed(derive_seed(run_seed, 0xDE6D), salt), index);
}

inline std::uint64_t sampling(std::uint64_t run_seed, std::size_t index) {
  return derive_seed(derive_seed(run_seed, 0x5A3F), index);
}

}  // namespace seeds

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config)
      : config_(validated(std::move(config))),
        schedule_(NoiseSchedule::from_params(config_.schedule)),
        selection_(config_.selection(schedule_)),
        codec_(std::make_unique<IdentityCodec>()) {
    if (config_.denoiser == DenoiserKind::Gaussian) {
      denoiser_ = std::make_unique<GaussianPosteriorDenoiser>(config_.gaussian_prior);
    } else {
      denoiser_ = std::make_unique<MixturePosteriorDenoiser>(config_.mixture_prior);
    }
    hash_ = config_hash(config_);
  }

  const PipelineConfig& config() const noexcept { return config_; }
  const NoiseSchedule& schedule() const noexcept { return schedule_; }
  const std::string& hash() const noexcept { return hash_; }

  /// Degrades a ground-truth field with the configured spec, seeded per scene.
  DepthField degrade(const DepthField& gt, std::size_t index) const {
    DegradationSpec spec = config_.degradation;
    spec.seed = seeds::degradation(config_.seed, config_.degradation.seed, index);
    return apply_spec(gt, spec);
  }

  SceneOutcome run(const SceneInput& scene, Ablation variant) const {
    if (!scene.gt.same_shape(scene.guide))
      throw DataError("scene " + scene.id + ": guide and ground truth differ in size");
    const CalibrationOutput cal = calibrate(scene.guide, scene.low, config_.calibration);
    SceneOutcome out;
    out.sigma_bar = cal.sigma_bar;

    if (variant == Ablation::NoDiffusion) {
      out.prediction = cal.z0_hat;
      out.choice = TimestepChoice{0, 1.0, 1.0};
    } else {
      const std::uint64_t sample_seed = seeds::sampling(config_.seed, scene.index);
      if (variant == Ablation::RandomT) {
        const CounterRng rng(sample_seed);
        const double u = rng.uniform(StreamId::RandomTimestep, 0);
        const auto t = std::min(schedule_.steps(), 1 + static_cast<std::size_t>(u * static_cast<double>(schedule_.steps())));
        out.choice = TimestepChoice{t, schedule_.alpha_bar(t), schedule_.alpha_bar(t)};
      } else {
        out.choice = select_timestep(cal.sigma_bar, selection_, schedule_);
      }
      const std::vector<double> z0 = codec_->encode(cal.z0_hat);
      NoiseScales scales = mean_and_noise_scales(z0, cal.sigma0_map.span(), out.choice.alpha_bar);
      const double kappa = variant == Ablation::GaussianNoise ? 0.0 : config_.kappa;
      const GuidedResidualProposal proposal(kappa, config_.highpass_radius);
      const std::vector<double> eps = proposal.propose(scene.guide, scales, sample_seed);
      const NoisyLatent noisy =
          inject_noise(std::move(scales), eps, out.choice.timestep, out.choice.alpha_bar, sample_seed);
      const std::vector<double> z_hat = denoiser_->denoise(scene.guide, noisy);
      for (double v : z_hat)
        if (!std::isfinite(v)) throw NumericError("scene " + scene.id + ": non-finite denoiser output");
      out.prediction = codec_->decode(z_hat, scene.gt.width(), scene.gt.height());
    }
    out.report = compute_metrics(out.prediction, scene.gt);
    out.report.scene_id = scene.id;
    out.report.config_hash = hash_;
    return out;
  }

 private:
  static PipelineConfig validated(PipelineConfig c) {
    c.validate();
    return c;
  }

  PipelineConfig config_;
  NoiseSchedule schedule_;
  SelectionConfig selection_;
  std::unique_ptr<LatentCodec> codec_;
  std::unique_ptr<Denoiser> denoiser_;
  std::string hash_;
};

}  // namespace diffdsr
