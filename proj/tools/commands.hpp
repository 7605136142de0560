#pragma once

// Subcommand implementations shared by the CLI and the acceptance suite.
// Every command is a pure function of its configuration; outputs are
// written with stable names and recorded in a JSON manifest with digests.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "diffdsr/diffdsr.hpp"
#include "json.hpp"

namespace diffdsr::commands {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kManifestName = "manifest.json";

inline std::string scene_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04zu", index);
  return buf;
}

inline std::string digest_of(const std::vector<std::uint8_t>& bytes) {
  return fnv1a_hex(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed " + path.string() + ": " + e.what());
  }
}

/// Writes a PFM and returns its manifest record.
inline json write_record(const fs::path& dir, const std::string& name, const ScalarField& values) {
  const auto bytes = encode_pfm(values);
  write_file_bytes(dir / name, bytes);
  return json{{"path", name}, {"digest", digest_of(bytes)}};
}

/// Reads a manifest record, checking the stored digest.
inline std::vector<std::uint8_t> read_record(const fs::path& dir, const json& record, const std::string& id) {
  if (!record.contains("path") || !record.contains("digest"))
    throw DataError("scene " + id + ": manifest record is incomplete");
  const fs::path path = dir / record.at("path").get<std::string>();
  if (!fs::exists(path)) throw DataError("scene " + id + ": missing file " + path.string());
  auto bytes = read_file_bytes(path);
  if (digest_of(bytes) != record.at("digest").get<std::string>())
    throw DataError("scene " + id + ": digest mismatch for " + path.string());
  return bytes;
}

inline json scene_spec_json(const SceneSpec& s) {
  std::vector<std::string> shapes;
  for (Shape sh : s.shapes) shapes.push_back(to_string(sh));
  return json{{"width", s.width},         {"height", s.height},       {"layers", s.layers},
              {"depth_min", s.depth_min}, {"depth_max", s.depth_max}, {"shapes", shapes},
              {"levels", s.levels}};
}

inline json degradation_json(const DegradationSpec& s) {
  return json{{"downsample", s.downsample_factor},
              {"noise_sigma", s.noise_sigma},
              {"blur_kernel", s.blur ? s.blur->kernel_size : 0},
              {"blur_sigma", s.blur ? s.blur->sigma : 0.0},
              {"removal_fraction", s.removal_fraction},
              {"quantization_step", s.quantization_step},
              {"seed", s.seed}};
}

// ---------------------------------------------------------------------------
// gen

inline json cmd_gen(const PipelineConfig& config) {
  config.validate();
  const fs::path dir = config.corpus_dir;
  ensure_dir(dir);
  json scenes = json::array();
  for (std::size_t i = 0; i < config.scene_count; ++i) {
    SceneSpec spec = config.scene;
    spec.seed = seeds::scene_layout(config.seed, i);
    const Scene scene = generate_scene(spec);
    const std::string id = scene_id(i);
    scenes.push_back(json{{"id", id},
                          {"index", i},
                          {"seed", spec.seed},
                          {"gt", write_record(dir, id + "_gt.pfm", scene.depth.values())},
                          {"guide", write_record(dir, id + "_guide.pfm", scene.guide)}});
  }
  json manifest{{"kind", "corpus"},
                {"seed", config.seed},
                {"scene_spec", scene_spec_json(config.scene)},
                {"scenes", std::move(scenes)}};
  write_text(dir / kManifestName, manifest.dump(2) + "\n");
  return manifest;
}

// ---------------------------------------------------------------------------
// Corpus loading

struct CorpusScene {
  std::string id;
  std::size_t index = 0;
  DepthField gt;
  ScalarField guide;
};

inline json load_manifest(const fs::path& dir, const char* kind) {
  const fs::path path = dir / kManifestName;
  if (!fs::exists(path)) throw DataError("no manifest in " + dir.string());
  json m = read_json(path);
  if (m.value("kind", "") != kind) throw DataError(path.string() + " is not a " + kind + " manifest");
  if (!m.contains("scenes") || !m.at("scenes").is_array()) throw DataError(path.string() + ": missing scene list");
  return m;
}

inline std::vector<CorpusScene> load_corpus(const PipelineConfig& config) {
  const fs::path dir = config.corpus_dir;
  const json m = load_manifest(dir, "corpus");
  std::vector<CorpusScene> out;
  for (const auto& entry : m.at("scenes")) {
    CorpusScene s;
    s.id = entry.value("id", "");
    s.index = entry.value("index", out.size());
    if (!entry.contains("gt") || !entry.contains("guide"))
      throw DataError("scene " + s.id + ": manifest lacks gt or guide");
    s.gt = decode_pfm(read_record(dir, entry.at("gt"), s.id));
    s.guide = decode_pfm_values(read_record(dir, entry.at("guide"), s.id));
    if (!s.gt.same_shape(s.guide)) throw DataError("scene " + s.id + ": guide and gt differ in size");
    out.push_back(std::move(s));
  }
  return out;
}

inline fs::path degraded_dir(const PipelineConfig& config) {
  return config.degraded_dir.empty() ? fs::path(config.corpus_dir) / "degraded" : fs::path(config.degraded_dir);
}

// ---------------------------------------------------------------------------
// degrade

inline json cmd_degrade(const PipelineConfig& config) {
  const Pipeline pipeline(config);
  const auto corpus = load_corpus(config);
  const fs::path dir = degraded_dir(config);
  ensure_dir(dir);
  json scenes = json::array();
  for (const auto& s : corpus) {
    const DepthField low = pipeline.degrade(s.gt, s.index);
    scenes.push_back(json{{"id", s.id}, {"index", s.index}, {"low", write_record(dir, s.id + "_low.pfm", low.values())}});
  }
  json manifest{{"kind", "degraded"},
                {"seed", config.seed},
                {"spec", degradation_json(config.degradation)},
                {"spec_hash", degradation_hash(config.degradation)},
                {"scenes", std::move(scenes)}};
  write_text(dir / kManifestName, manifest.dump(2) + "\n");
  return manifest;
}

/// Pipeline inputs for every corpus scene. Low-resolution inputs come from
/// the degraded corpus when `paths.degraded` is set, otherwise they are
/// produced in memory from the configured spec.
inline std::vector<SceneInput> load_inputs(const Pipeline& pipeline, std::optional<std::size_t> only = {}) {
  const PipelineConfig& config = pipeline.config();
  auto corpus = load_corpus(config);
  if (only) std::erase_if(corpus, [&](const CorpusScene& s) { return s.index != *only; });
  std::map<std::string, DepthField> lows;
  if (!config.degraded_dir.empty()) {
    const fs::path dir = config.degraded_dir;
    const json m = load_manifest(dir, "degraded");
    for (const auto& entry : m.at("scenes")) {
      const std::string id = entry.value("id", "");
      if (!entry.contains("low")) throw DataError("scene " + id + ": manifest lacks low-resolution input");
      lows[id] = decode_pfm(read_record(dir, entry.at("low"), id));
    }
  }
  std::vector<SceneInput> out;
  out.reserve(corpus.size());
  for (auto& s : corpus) {
    SceneInput in;
    in.id = s.id;
    in.index = s.index;
    if (config.degraded_dir.empty()) {
      in.low = pipeline.degrade(s.gt, s.index);
    } else {
      const auto it = lows.find(s.id);
      if (it == lows.end()) throw DataError("scene " + s.id + ": no degraded input");
      in.low = std::move(it->second);
    }
    in.gt = std::move(s.gt);
    in.guide = std::move(s.guide);
    out.push_back(std::move(in));
  }
  return out;
}

// ---------------------------------------------------------------------------
// run

struct VariantResult {
  Ablation variant = Ablation::None;
  std::vector<SceneOutcome> scenes;
  MetricReport corpus;
  double mean_sigma_bar = 0.0;
  double mean_alpha_bar = 0.0;
};

struct RunResult {
  std::string config_hash;
  std::vector<VariantResult> variants;

  const VariantResult& at(Ablation v) const {
    for (const auto& r : variants)
      if (r.variant == v) return r;
    throw std::out_of_range("variant " + to_string(v) + " was not run");
  }
};

/// Applies `fn(i)` for i in [0, n) on up to `jobs` threads. The first
/// exception (by index) is rethrown after all workers finish.
template <typename F>
void parallel_for(std::size_t n, std::size_t jobs, F fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  std::vector<std::exception_ptr> errors(n);
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline RunResult run_inputs(const Pipeline& pipeline, const std::vector<SceneInput>& inputs,
                            const std::vector<Ablation>& variants, std::size_t jobs) {
  RunResult result;
  result.config_hash = pipeline.hash();
  for (Ablation v : variants) {
    VariantResult vr;
    vr.variant = v;
    vr.scenes.resize(inputs.size());
    parallel_for(inputs.size(), jobs, [&](std::size_t i) { vr.scenes[i] = pipeline.run(inputs[i], v); });
    std::vector<MetricReport> reports;
    for (const auto& s : vr.scenes) {
      reports.push_back(s.report);
      vr.mean_sigma_bar += s.sigma_bar;
      vr.mean_alpha_bar += s.choice.alpha_bar;
    }
    if (!inputs.empty()) {
      vr.corpus = aggregate(reports);
      vr.mean_sigma_bar /= static_cast<double>(inputs.size());
      vr.mean_alpha_bar /= static_cast<double>(inputs.size());
    }
    result.variants.push_back(std::move(vr));
  }
  return result;
}

inline json report_json(const MetricReport& r) {
  return json{{"rmse", r.rmse}, {"mae", r.mae}, {"delta_105", r.delta_105}, {"valid_count", r.valid_count}};
}

inline std::string metrics_csv(const RunResult& result) {
  using detail::format_number;
  std::ostringstream o;
  o << "variant,scene_id,rmse,mae,delta_105,valid_count,nonfinite_pred,timestep,alpha_bar,sigma_bar,config_hash\n";
  for (const auto& v : result.variants)
    for (const auto& s : v.scenes)
      o << to_string(v.variant) << ',' << s.report.scene_id << ',' << format_number(s.report.rmse) << ','
        << format_number(s.report.mae) << ',' << format_number(s.report.delta_105) << ',' << s.report.valid_count
        << ',' << s.report.nonfinite_pred << ',' << s.choice.timestep << ',' << format_number(s.choice.alpha_bar)
        << ',' << format_number(s.sigma_bar) << ',' << s.report.config_hash << '\n';
  return o.str();
}

inline json summary_json(const PipelineConfig& config, const RunResult& result) {
  json variants = json::object();
  for (const auto& v : result.variants) {
    json j = report_json(v.corpus);
    j["scene_count"] = v.scenes.size();
    j["mean_sigma_bar"] = v.mean_sigma_bar;
    j["mean_alpha_bar"] = v.mean_alpha_bar;
    variants[to_string(v.variant)] = std::move(j);
  }
  json out = result.variants.empty() ? json::object() : report_json(result.variants.front().corpus);
  out["config_hash"] = result.config_hash;
  out["seed"] = config.seed;
  out["variants"] = std::move(variants);
  return out;
}

inline RunResult cmd_run(const PipelineConfig& config, std::size_t jobs = 1) {
  const Pipeline pipeline(config);
  const auto inputs = load_inputs(pipeline);
  RunResult result = run_inputs(pipeline, inputs, config.ablations, jobs);

  const fs::path out = config.output_dir;
  ensure_dir(out);
  json files = json::array();
  for (const auto& v : result.variants) {
    const fs::path dir = out / to_string(v.variant);
    ensure_dir(dir);
    for (std::size_t i = 0; i < v.scenes.size(); ++i) {
      json rec = write_record(dir, inputs[i].id + "_pred.pfm", v.scenes[i].prediction.values());
      rec["path"] = to_string(v.variant) + "/" + rec["path"].get<std::string>();
      files.push_back(std::move(rec));
    }
  }
  const std::string csv = metrics_csv(result);
  const std::string summary = summary_json(config, result).dump(2) + "\n";
  const std::string config_text = to_text(config);
  write_text(out / "metrics.csv", csv);
  write_text(out / "summary.json", summary);
  write_text(out / "config.txt", config_text);
  files.push_back(json{{"path", "metrics.csv"}, {"digest", fnv1a_hex(csv)}});
  files.push_back(json{{"path", "summary.json"}, {"digest", fnv1a_hex(summary)}});
  files.push_back(json{{"path", "config.txt"}, {"digest", fnv1a_hex(config_text)}});
  json manifest{{"kind", "run"}, {"config_hash", result.config_hash}, {"files", std::move(files)}};
  write_text(out / kManifestName, manifest.dump(2) + "\n");
  return result;
}

// ---------------------------------------------------------------------------
// verify-prop

struct PropReport {
  double analytic = 1.0;         // closed-form maximiser
  double grid_argmax = 1.0;      // best grid point
  double gap = 0.0;              // |analytic - grid_argmax|
  double resolution = 0.0;       // grid spacing around the grid maximiser
  std::size_t sign_changes = 0;  // of the forward-difference derivative
  std::vector<double> alpha;
  std::vector<double> h;
};

/// Samples H on `grid_size` log-spaced points over [alpha_lo, 1].
inline PropReport verify_prop(const TradeoffParams& params, std::size_t grid_size, double alpha_lo = 1e-6) {
  params.validate();
  if (grid_size < 3) throw ConfigError("verify-prop: grid size must be >= 3");
  if (!(alpha_lo > 0.0 && alpha_lo < 1.0)) throw ConfigError("verify-prop: alpha_lo must lie in (0, 1)");
  PropReport r;
  r.analytic = h_maximizer(params);
  r.alpha.resize(grid_size);
  r.h.resize(grid_size);
  const double lo = std::log(alpha_lo);
  for (std::size_t i = 0; i < grid_size; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(grid_size - 1);
    r.alpha[i] = i + 1 == grid_size ? 1.0 : std::exp(lo * (1.0 - u));
    r.h[i] = h_objective(r.alpha[i], params);
  }
  const auto best = static_cast<std::size_t>(std::max_element(r.h.begin(), r.h.end()) - r.h.begin());
  r.grid_argmax = r.alpha[best];
  r.gap = std::abs(r.analytic - r.grid_argmax);
  const std::size_t a = best == 0 ? 0 : best - 1;
  const std::size_t b = std::min(best + 1, grid_size - 1);
  r.resolution = r.alpha[b] - r.alpha[a];
  int prev = 0;
  for (std::size_t i = 0; i + 1 < grid_size; ++i) {
    const double d = r.h[i + 1] - r.h[i];
    const int sign = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    if (sign == 0) continue;
    if (prev != 0 && sign != prev) ++r.sign_changes;
    prev = sign;
  }
  return r;
}

inline PropReport cmd_verify_prop(const TradeoffParams& params, std::size_t grid_size, const fs::path& csv_path) {
  PropReport r = verify_prop(params, grid_size);
  if (!csv_path.empty()) {
    if (csv_path.has_parent_path()) ensure_dir(csv_path.parent_path());
    std::ostringstream o;
    o << "alpha_bar,h\n";
    for (std::size_t i = 0; i < r.alpha.size(); ++i)
      o << detail::format_number(r.alpha[i]) << ',' << detail::format_number(r.h[i]) << '\n';
    write_text(csv_path, o.str());
  }
  return r;
}

// ---------------------------------------------------------------------------
// contraction

struct ContractionRow {
  std::size_t t = 0;
  double alpha_bar = 0.0;
  double exact = 0.0;
  double surrogate = 0.0;
};

/// W2 between the calibrated forward marginal N(sqrt(a) z0_hat, a s^2 + 1 - a)
/// (s = sigma_bar) and the clean one N(sqrt(a) z, 1 - a) at every step, next
/// to the surrogate sqrt(a) * ||z0_hat - z||.
inline std::vector<ContractionRow> contraction_rows(const NoiseSchedule& schedule, const CalibrationOutput& cal,
                                                    const DepthField& gt) {
  const auto z0 = cal.z0_hat.values().span();
  const auto z = gt.values().span();
  if (z0.size() != z.size()) throw DataError("contraction: shape mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sq += (z0[i] - z[i]) * (z0[i] - z[i]);
  const double omega = std::sqrt(sq);
  std::vector<ContractionRow> rows;
  rows.reserve(schedule.steps());
  for (std::size_t t = 1; t <= schedule.steps(); ++t) {
    const double a = schedule.alpha_bar(t);
    rows.push_back({t, a, wasserstein2_forward(sq, z.size(), cal.sigma_bar, a), wasserstein2_surrogate(a, omega)});
  }
  return rows;
}

inline std::vector<ContractionRow> cmd_contraction(const PipelineConfig& config, std::size_t index,
                                                   const fs::path& csv_path) {
  const Pipeline pipeline(config);
  const auto inputs = load_inputs(pipeline, index);
  const auto it = std::find_if(inputs.begin(), inputs.end(), [&](const SceneInput& s) { return s.index == index; });
  if (it == inputs.end()) throw DataError("contraction: no scene with index " + std::to_string(index));
  const CalibrationOutput cal = calibrate(it->guide, it->low, config.calibration);
  auto rows = contraction_rows(pipeline.schedule(), cal, it->gt);
  if (!csv_path.empty()) {
    if (csv_path.has_parent_path()) ensure_dir(csv_path.parent_path());
    std::ostringstream o;
    o << "t,alpha_bar,w2_exact,w2_surrogate\n";
    for (const auto& r : rows)
      o << r.t << ',' << detail::format_number(r.alpha_bar) << ',' << detail::format_number(r.exact) << ','
        << detail::format_number(r.surrogate) << '\n';
    write_text(csv_path, o.str());
  }
  return rows;
}

// ---------------------------------------------------------------------------
// sweep-tau

struct SweepRow {
  double tau = 0.0;
  MetricReport corpus;
  double mean_alpha_bar = 0.0;
};

/// Full-pipeline corpus metrics per tau. Predictions are not written.
inline std::vector<SweepRow> cmd_sweep_tau(const PipelineConfig& config, std::size_t jobs = 1) {
  config.validate();
  std::vector<SweepRow> rows;
  std::vector<SceneInput> inputs;
  for (double tau : config.sweep_taus) {
    PipelineConfig c = config;
    c.tau = tau;
    const Pipeline pipeline(c);
    if (inputs.empty()) inputs = load_inputs(pipeline);
    const RunResult r = run_inputs(pipeline, inputs, {Ablation::None}, jobs);
    rows.push_back({tau, r.variants.front().corpus, r.variants.front().mean_alpha_bar});
  }
  const fs::path out = config.output_dir;
  ensure_dir(out);
  std::ostringstream o;
  o << "tau,rmse,mae,delta_105,mean_alpha_bar\n";
  json table = json::array();
  for (const auto& r : rows) {
    using detail::format_number;
    o << format_number(r.tau) << ',' << format_number(r.corpus.rmse) << ',' << format_number(r.corpus.mae) << ','
      << format_number(r.corpus.delta_105) << ',' << format_number(r.mean_alpha_bar) << '\n';
    json j = report_json(r.corpus);
    j["tau"] = r.tau;
    j["mean_alpha_bar"] = r.mean_alpha_bar;
    table.push_back(std::move(j));
  }
  write_text(out / "sweep_tau.csv", o.str());
  write_text(out / "sweep_tau.json", json{{"config_hash", config_hash(config)}, {"rows", table}}.dump(2) + "\n");
  return rows;
}

// ---------------------------------------------------------------------------
// fit-sigma

struct FitReport {
  double sigma_scale = 0.0;
  double coverage = 0.0;  // fraction of pixels with |z0_hat - gt| <= 2 sigma0
  double nll = 0.0;
};

inline std::vector<CalibrationSample> calibration_samples(const Pipeline& pipeline,
                                                          const std::vector<SceneInput>& inputs) {
  std::vector<CalibrationSample> out;
  for (const auto& s : inputs) {
    RefinementResult r = refine(s.guide, s.low, pipeline.config().calibration.range_fraction);
    out.push_back({r.z0_hat.values().values(), r.raw_sigma.values(), s.gt.values().values()});
  }
  return out;
}

/// Coverage of +-2 sigma intervals and mean NLL under a given scale.
inline FitReport evaluate_scale(std::span<const CalibrationSample> samples, double scale,
                                double floor = kSigmaFloor) {
  FitReport r;
  r.sigma_scale = scale;
  std::size_t inside = 0, total = 0;
  double nll = 0.0;
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < s.z0_hat.size(); ++i) {
      const double sigma = std::max(scale * s.raw_sigma[i], floor);
      const double d = s.z0_hat[i] - s.z_gt[i];
      inside += std::abs(d) <= 2.0 * sigma;
      nll += std::log(sigma * sigma) + d * d / (sigma * sigma);
      ++total;
    }
  }
  if (total > 0) {
    r.coverage = static_cast<double>(inside) / static_cast<double>(total);
    r.nll = nll / static_cast<double>(total);
  }
  return r;
}

inline FitReport cmd_fit_sigma(const PipelineConfig& config) {
  const Pipeline pipeline(config);
  const auto samples = calibration_samples(pipeline, load_inputs(pipeline));
  return evaluate_scale(samples, fit_sigma_scale(samples, config.calibration.sigma_floor),
                        config.calibration.sigma_floor);
}

}  // namespace diffdsr::commands
