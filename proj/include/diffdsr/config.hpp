#pragma once

// Run configuration and its line-oriented `key = value` text form.
//
// The writer emits every key in a fixed order with shortest round-trip
// number formatting, so save(load(text)) reproduces text byte for byte for
// any file produced by save. Unknown keys are rejected.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "diffdsr/calibration.hpp"
#include "diffdsr/degradation.hpp"
#include "diffdsr/error.hpp"
#include "diffdsr/sampling.hpp"
#include "diffdsr/scenegen.hpp"
#include "diffdsr/schedule.hpp"
#include "diffdsr/selection.hpp"

namespace diffdsr {

enum class DenoiserKind { Gaussian, Mixture };

/// Pipeline variants; everything but Full removes or replaces one stage.
enum class Ablation { None, RandomT, GaussianNoise, NoDiffusion };

inline std::string to_string(DenoiserKind k) { return k == DenoiserKind::Gaussian ? "gaussian" : "mixture"; }

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::RandomT: return "random-t";
    case Ablation::GaussianNoise: return "gaussian-noise";
    case Ablation::NoDiffusion: return "no-diffusion";
  }
  return "unknown";
}

inline Ablation parse_ablation(std::string_view text) {
  if (text == "none") return Ablation::None;
  if (text == "random-t") return Ablation::RandomT;
  if (text == "gaussian-noise") return Ablation::GaussianNoise;
  if (text == "no-diffusion") return Ablation::NoDiffusion;
  throw ConfigError("unknown ablation '" + std::string(text) + "'");
}

/// Calibration scale fitted with `fit-sigma` on a training corpus generated
/// under the default scene and degradation settings (seed 1000, 40 scenes).
inline constexpr double kDefaultSigmaScale = 2.733;

struct PipelineConfig {
  std::uint64_t seed = 0;

  ScheduleParams schedule;

  SelectionRule rule = SelectionRule::Simplified;
  double tau = 0.14;
  std::optional<double> alpha_min;  // empty: alpha_bar at the final timestep

  DegradationSpec degradation = DegradationSpec::heaviest();

  CalibrationConfig calibration{kDefaultSigmaScale, 0.1, kSigmaFloor};

  double kappa = 1.0;
  std::size_t highpass_radius = 16;

  DenoiserKind denoiser = DenoiserKind::Mixture;
  GaussianPrior gaussian_prior{{3.0}, 1.0};
  MixturePrior mixture_prior{{{0.5, 2.0, 0.005}, {0.5, 5.0, 0.005}}};

  std::size_t scene_count = 50;
  SceneSpec scene = default_scene();

  std::string corpus_dir = "corpus";
  std::string degraded_dir;  // empty: degrade in memory from `degradation`
  std::string output_dir = "out";

  std::vector<Ablation> ablations{Ablation::None};
  std::vector<double> sweep_taus{0.02, 0.06, 0.10, 0.14, 0.16, 0.28, 0.56};

  static SceneSpec default_scene() {
    SceneSpec s;
    s.width = 384;
    s.height = 384;
    s.layers = 2;
    s.depth_min = 1.0;
    s.depth_max = 6.0;
    s.shapes = {Shape::Plane, Shape::Rectangle, Shape::Disk};
    s.levels = {2.0, 5.0};
    return s;
  }

  SelectionConfig selection(const NoiseSchedule& sched) const {
    SelectionConfig c = SelectionConfig::for_schedule(sched);
    c.tau = tau;
    c.rule = rule;
    if (alpha_min) c.alpha_min = *alpha_min;
    return c;
  }

  /// Range checks across all sections; throws ConfigError.
  void validate() const {
    try {
      const NoiseSchedule sched = NoiseSchedule::from_params(schedule);
      selection(sched).validate();
      degradation.validate();
      calibration.validate();
      detail::require(std::isfinite(kappa) && kappa >= 0.0, "kappa must be >= 0");
      if (denoiser == DenoiserKind::Gaussian) {
        detail::require(gaussian_prior.mean.size() == 1, "gaussian prior mean must be a scalar");
        gaussian_prior.validate(1);
      } else {
        mixture_prior.validate();
      }
      SceneSpec s = scene;
      s.validate();
      detail::require(!ablations.empty(), "at least one ablation variant is required");
      for (double t : sweep_taus) detail::require(std::isfinite(t) && t > 0.0, "sweep taus must be > 0");
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
  return v;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + text + "'");
  return v;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, const char* sep, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += f(xs[i]);
  }
  return out;
}

}  // namespace detail

inline std::string to_text(const PipelineConfig& c) {
  using detail::format_number;
  std::ostringstream o;
  auto kv = [&](const char* key, const std::string& value) { o << key << " = " << value << "\n"; };
  o << "# diffdsr run configuration\n";
  kv("seed", std::to_string(c.seed));
  kv("schedule.kind", to_string(c.schedule.kind));
  kv("schedule.steps", std::to_string(c.schedule.steps));
  kv("schedule.beta_start", format_number(c.schedule.beta_start));
  kv("schedule.beta_end", format_number(c.schedule.beta_end));
  kv("selection.rule", to_string(c.rule));
  kv("selection.tau", format_number(c.tau));
  kv("selection.alpha_min", c.alpha_min ? format_number(*c.alpha_min) : "auto");
  kv("degradation.downsample", format_number(c.degradation.downsample_factor));
  kv("degradation.noise_sigma", format_number(c.degradation.noise_sigma));
  kv("degradation.blur_kernel", std::to_string(c.degradation.blur ? c.degradation.blur->kernel_size : 0));
  kv("degradation.blur_sigma", format_number(c.degradation.blur ? c.degradation.blur->sigma : 0.5));
  kv("degradation.removal_fraction", format_number(c.degradation.removal_fraction));
  kv("degradation.quantization_step", format_number(c.degradation.quantization_step));
  kv("degradation.seed", std::to_string(c.degradation.seed));
  kv("calibration.sigma_scale", format_number(c.calibration.sigma_scale));
  kv("calibration.range_fraction", format_number(c.calibration.range_fraction));
  kv("calibration.sigma_floor", format_number(c.calibration.sigma_floor));
  kv("sampling.kappa", format_number(c.kappa));
  kv("sampling.highpass_radius", std::to_string(c.highpass_radius));
  kv("denoiser.kind", to_string(c.denoiser));
  kv("denoiser.gaussian.mean", format_number(c.gaussian_prior.mean.empty() ? 0.0 : c.gaussian_prior.mean[0]));
  kv("denoiser.gaussian.sigma", format_number(c.gaussian_prior.sigma));
  kv("denoiser.mixture", detail::join(c.mixture_prior.components, "; ", [](const MixtureComponent& m) {
       return format_number(m.weight) + ":" + format_number(m.mean) + ":" + format_number(m.sigma);
     }));
  kv("scene.count", std::to_string(c.scene_count));
  kv("scene.width", std::to_string(c.scene.width));
  kv("scene.height", std::to_string(c.scene.height));
  kv("scene.layers", std::to_string(c.scene.layers));
  kv("scene.depth_min", format_number(c.scene.depth_min));
  kv("scene.depth_max", format_number(c.scene.depth_max));
  kv("scene.shapes", detail::join(std::vector<Shape>(c.scene.shapes.begin(), c.scene.shapes.end()), ",",
                                  [](Shape s) { return to_string(s); }));
  kv("scene.levels", detail::join(c.scene.levels, ",", format_number));
  kv("paths.corpus", c.corpus_dir);
  kv("paths.degraded", c.degraded_dir);
  kv("paths.output", c.output_dir);
  kv("run.ablation", detail::join(c.ablations, ",", [](Ablation a) { return to_string(a); }));
  kv("sweep.taus", detail::join(c.sweep_taus, ",", format_number));
  return o.str();
}

/// Applies one `key = value` assignment; throws ConfigError for unknown keys
/// or unparsable values. Shared by the file parser and CLI overrides.
inline void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_u64;
  try {
    static const std::map<std::string, std::function<void(PipelineConfig&, const std::string&)>> setters = {
        {"seed", [](PipelineConfig& p, const std::string& v) { p.seed = parse_u64("seed", v); }},
        {"schedule.kind",
         [](PipelineConfig& p, const std::string& v) {
           if (v != "linear") throw ConfigError("config key 'schedule.kind': unknown kind '" + v + "'");
           p.schedule.kind = ScheduleKind::Linear;
         }},
        {"schedule.steps", [](PipelineConfig& p, const std::string& v) { p.schedule.steps = parse_u64("schedule.steps", v); }},
        {"schedule.beta_start", [](PipelineConfig& p, const std::string& v) { p.schedule.beta_start = parse_double("schedule.beta_start", v); }},
        {"schedule.beta_end", [](PipelineConfig& p, const std::string& v) { p.schedule.beta_end = parse_double("schedule.beta_end", v); }},
        {"selection.rule", [](PipelineConfig& p, const std::string& v) { p.rule = parse_selection_rule(v); }},
        {"selection.tau", [](PipelineConfig& p, const std::string& v) { p.tau = parse_double("selection.tau", v); }},
        {"selection.alpha_min",
         [](PipelineConfig& p, const std::string& v) {
           if (v == "auto") p.alpha_min.reset();
           else p.alpha_min = parse_double("selection.alpha_min", v);
         }},
        {"degradation.downsample", [](PipelineConfig& p, const std::string& v) { p.degradation.downsample_factor = parse_double("degradation.downsample", v); }},
        {"degradation.noise_sigma", [](PipelineConfig& p, const std::string& v) { p.degradation.noise_sigma = parse_double("degradation.noise_sigma", v); }},
        {"degradation.blur_kernel",
         [](PipelineConfig& p, const std::string& v) {
           const auto k = parse_u64("degradation.blur_kernel", v);
           const double sigma = p.degradation.blur ? p.degradation.blur->sigma : 0.5;
           if (k == 0) p.degradation.blur.reset();
           else p.degradation.blur = BlurSpec{static_cast<std::size_t>(k), sigma};
         }},
        {"degradation.blur_sigma",
         [](PipelineConfig& p, const std::string& v) {
           const double s = parse_double("degradation.blur_sigma", v);
           if (p.degradation.blur) p.degradation.blur->sigma = s;
         }},
        {"degradation.removal_fraction", [](PipelineConfig& p, const std::string& v) { p.degradation.removal_fraction = parse_double("degradation.removal_fraction", v); }},
        {"degradation.quantization_step", [](PipelineConfig& p, const std::string& v) { p.degradation.quantization_step = parse_double("degradation.quantization_step", v); }},
        {"degradation.seed", [](PipelineConfig& p, const std::string& v) { p.degradation.seed = parse_u64("degradation.seed", v); }},
        {"calibration.sigma_scale", [](PipelineConfig& p, const std::string& v) { p.calibration.sigma_scale = parse_double("calibration.sigma_scale", v); }},
        {"calibration.range_fraction", [](PipelineConfig& p, const std::string& v) { p.calibration.range_fraction = parse_double("calibration.range_fraction", v); }},
        {"calibration.sigma_floor", [](PipelineConfig& p, const std::string& v) { p.calibration.sigma_floor = parse_double("calibration.sigma_floor", v); }},
        {"sampling.kappa", [](PipelineConfig& p, const std::string& v) { p.kappa = parse_double("sampling.kappa", v); }},
        {"sampling.highpass_radius", [](PipelineConfig& p, const std::string& v) { p.highpass_radius = parse_u64("sampling.highpass_radius", v); }},
        {"denoiser.kind",
         [](PipelineConfig& p, const std::string& v) {
           if (v == "gaussian") p.denoiser = DenoiserKind::Gaussian;
           else if (v == "mixture") p.denoiser = DenoiserKind::Mixture;
           else throw ConfigError("config key 'denoiser.kind': unknown denoiser '" + v + "'");
         }},
        {"denoiser.gaussian.mean", [](PipelineConfig& p, const std::string& v) { p.gaussian_prior.mean = {parse_double("denoiser.gaussian.mean", v)}; }},
        {"denoiser.gaussian.sigma", [](PipelineConfig& p, const std::string& v) { p.gaussian_prior.sigma = parse_double("denoiser.gaussian.sigma", v); }},
        {"denoiser.mixture",
         [](PipelineConfig& p, const std::string& v) {
           MixturePrior m;
           for (const auto& item : detail::split(v, ';')) {
             const auto parts = detail::split(item, ':');
             if (parts.size() != 3)
               throw ConfigError("config key 'denoiser.mixture': expected weight:mean:sigma, got '" + item + "'");
             m.components.push_back({parse_double("denoiser.mixture", parts[0]), parse_double("denoiser.mixture", parts[1]),
                                     parse_double("denoiser.mixture", parts[2])});
           }
           p.mixture_prior = std::move(m);
         }},
        {"scene.count", [](PipelineConfig& p, const std::string& v) { p.scene_count = parse_u64("scene.count", v); }},
        {"scene.width", [](PipelineConfig& p, const std::string& v) { p.scene.width = parse_u64("scene.width", v); }},
        {"scene.height", [](PipelineConfig& p, const std::string& v) { p.scene.height = parse_u64("scene.height", v); }},
        {"scene.layers", [](PipelineConfig& p, const std::string& v) { p.scene.layers = parse_u64("scene.layers", v); }},
        {"scene.depth_min", [](PipelineConfig& p, const std::string& v) { p.scene.depth_min = parse_double("scene.depth_min", v); }},
        {"scene.depth_max", [](PipelineConfig& p, const std::string& v) { p.scene.depth_max = parse_double("scene.depth_max", v); }},
        {"scene.shapes",
         [](PipelineConfig& p, const std::string& v) {
           p.scene.shapes.clear();
           for (const auto& s : detail::split(v, ',')) p.scene.shapes.insert(parse_shape(s));
         }},
        {"scene.levels",
         [](PipelineConfig& p, const std::string& v) {
           p.scene.levels.clear();
           for (const auto& s : detail::split(v, ',')) p.scene.levels.push_back(parse_double("scene.levels", s));
         }},
        {"paths.corpus", [](PipelineConfig& p, const std::string& v) { p.corpus_dir = v; }},
        {"paths.degraded", [](PipelineConfig& p, const std::string& v) { p.degraded_dir = v; }},
        {"paths.output", [](PipelineConfig& p, const std::string& v) { p.output_dir = v; }},
        {"run.ablation",
         [](PipelineConfig& p, const std::string& v) {
           p.ablations.clear();
           for (const auto& s : detail::split(v, ',')) p.ablations.push_back(parse_ablation(s));
         }},
        {"sweep.taus",
         [](PipelineConfig& p, const std::string& v) {
           p.sweep_taus.clear();
           for (const auto& s : detail::split(v, ',')) p.sweep_taus.push_back(parse_double("sweep.taus", s));
         }},
    };
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(c, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

/// Parses text produced by to_text (or hand-written in the same format).
/// Keys absent from the text keep their defaults.
inline PipelineConfig parse_config(std::string_view text) {
  PipelineConfig c;
  std::size_t line_no = 0;
  std::size_t start = 0;
  std::string blur_sigma;  // applied after blur_kernel regardless of order
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    const std::string t = detail::trim(line);
    if (!t.empty() && t[0] != '#') {
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
      const std::string key = detail::trim(std::string_view(t).substr(0, eq));
      const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
      if (key == "degradation.blur_sigma") {
        detail::parse_double(key, value);
        blur_sigma = value;
      } else {
        set_config_value(c, key, value);
      }
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  if (!blur_sigma.empty()) set_config_value(c, "degradation.blur_sigma", blur_sigma);
  c.validate();
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline void save_config(const std::filesystem::path& path, const PipelineConfig& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << to_text(c);
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xF];
  return out;
}

/// Digest of the canonical text form; equals the digest of any file
/// written by save_config for the same configuration.
inline std::string config_hash(const PipelineConfig& c) { return fnv1a_hex(to_text(c)); }

/// Digest over the degradation fields only.
inline std::string degradation_hash(const DegradationSpec& s) {
  PipelineConfig probe;
  probe.degradation = s;
  std::ostringstream o;
  const std::string text = to_text(probe);
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);)
    if (line.rfind("degradation.", 0) == 0) o << line << "\n";
  return fnv1a_hex(o.str());
}

}  // namespace diffdsr
