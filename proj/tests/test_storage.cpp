#include <gtest/gtest.h>

#include <bit>
#include <filesystem>
#include <random>

#include "diffdsr/config.hpp"
#include "diffdsr/pfm.hpp"

using namespace diffdsr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("diffdsr_storage_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DepthField random_field(std::mt19937_64& eng, std::size_t w, std::size_t h, double hole_rate) {
  std::uniform_real_distribution<float> u(0.01f, 100.0f);
  std::bernoulli_distribution hole(hole_rate);
  DepthField f(w, h);
  for (std::size_t i = 0; i < f.size(); ++i) f.set(i, hole(eng) ? DepthField::kInvalid : static_cast<double>(u(eng)));
  return f;
}

PfmError::Kind decode_error(const std::string& text) {
  try {
    decode_pfm(std::vector<std::uint8_t>(text.begin(), text.end()));
  } catch (const PfmError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for " << text;
  return PfmError::Kind::Io;
}

}  // namespace

TEST(Pfm, RoundTrip7x5) {
  std::mt19937_64 eng(1);
  const auto f = random_field(eng, 7, 5, 0.2);
  const auto g = decode_pfm(encode_pfm(f));
  EXPECT_EQ(g, f);
  EXPECT_EQ(g.mask(), f.mask());
}

TEST(Pfm, FileRoundTrip) {
  std::mt19937_64 eng(2);
  const auto dir = temp_dir("file");
  const auto f = random_field(eng, 13, 9, 0.1);
  write_pfm(dir / "a.pfm", f);
  EXPECT_EQ(read_pfm(dir / "a.pfm"), f);
  EXPECT_THROW(read_pfm(dir / "missing.pfm"), PfmError);
  fs::remove_all(dir);
}

TEST(Pfm, SinglePixelLayout) {
  const auto bytes = encode_pfm(DepthField(1, 1, 2.5));
  const std::string header = "Pf\n1 1\n-1.0\n";
  ASSERT_EQ(bytes.size(), header.size() + 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(header.size())), header);
  EXPECT_EQ(bytes[header.size() + 0], 0x00);
  EXPECT_EQ(bytes[header.size() + 1], 0x00);
  EXPECT_EQ(bytes[header.size() + 2], 0x20);
  EXPECT_EQ(bytes[header.size() + 3], 0x40);
}

TEST(Pfm, RowsAreStoredBottomUp) {
  const DepthField f(ScalarField(1, 2, std::vector<double>{1.0, 2.0}));  // top = 1, bottom = 2
  const auto bytes = encode_pfm(f);
  const std::size_t off = bytes.size() - 8;
  std::uint32_t first = 0;
  for (int b = 0; b < 4; ++b) first |= std::uint32_t{bytes[off + b]} << (8 * b);
  EXPECT_EQ(std::bit_cast<float>(first), 2.0f);
}

TEST(Pfm, Errors) {
  EXPECT_EQ(decode_error("Pf\n1 1\n1.0\n\0\0\0\0"), PfmError::Kind::UnsupportedEndianness);
  EXPECT_EQ(decode_error(std::string("Pf\n2 2\n-1.0\n\0\0\0\0", 16)), PfmError::Kind::Truncated);
  EXPECT_EQ(decode_error("P5\n1 1\n-1.0\n"), PfmError::Kind::MalformedHeader);
  EXPECT_EQ(decode_error("Pf\nx 1\n-1.0\n"), PfmError::Kind::MalformedHeader);
  EXPECT_EQ(decode_error("Pf\n1"), PfmError::Kind::MalformedHeader);
  EXPECT_EQ(decode_error("Pf\n0 1\n-1.0\n"), PfmError::Kind::MalformedHeader);
}

TEST(Pfm, ThousandRandomFieldsBitExact) {
  std::mt19937_64 eng(3);
  std::uniform_int_distribution<std::size_t> dim(1, 40);
  for (int i = 0; i < 1000; ++i) {
    const auto f = random_field(eng, dim(eng), dim(eng), 0.15);
    const auto bytes = encode_pfm(f);
    const auto raw = decode_pfm_values(bytes);
    ASSERT_EQ(decode_pfm(bytes), f);
    for (std::size_t k = 0; k < f.size(); ++k) {
      if (!f.valid(k)) {
        ASSERT_TRUE(std::isnan(raw[k]));
        continue;
      }
      ASSERT_EQ(std::bit_cast<std::uint64_t>(raw[k]), std::bit_cast<std::uint64_t>(f[k]));
    }
    ASSERT_EQ(encode_pfm(decode_pfm(bytes)), bytes);
  }
}

TEST(DepthFieldType, InvalidPixelsHoldNaN) {
  DepthField f(3, 1, 1.0);
  f.set(0, -2.0);
  f.set(1, INFINITY);
  EXPECT_FALSE(f.valid(0));
  EXPECT_FALSE(f.valid(1));
  EXPECT_TRUE(std::isnan(f[0]));
  EXPECT_TRUE(std::isnan(f[1]));
  EXPECT_EQ(f.valid_count(), 1u);
  EXPECT_THROW(ScalarField(2, 2, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Config, DefaultsRoundTripByteIdentically) {
  const PipelineConfig c;
  const std::string text = to_text(c);
  EXPECT_EQ(to_text(parse_config(text)), text);
  const auto dir = temp_dir("config");
  save_config(dir / "run.cfg", c);
  EXPECT_EQ(to_text(load_config(dir / "run.cfg")), text);
  fs::remove_all(dir);
}

TEST(Config, DefaultTauIsPresent) {
  EXPECT_NE(to_text(PipelineConfig{}).find("selection.tau = 0.14\n"), std::string::npos);
}

TEST(Config, NonDefaultRoundTrip) {
  PipelineConfig c;
  c.seed = 12345678901234ull;
  c.tau = 0.3;
  c.alpha_min = 0.05;
  c.rule = SelectionRule::Threshold;
  c.degradation.blur.reset();
  c.denoiser = DenoiserKind::Gaussian;
  c.mixture_prior = {{{0.25, 1.5, 0.1}, {0.75, 4.0, 0.2}}};
  c.ablations = {Ablation::RandomT, Ablation::NoDiffusion};
  c.scene.shapes = {Shape::Disk};
  c.sweep_taus = {0.1, 0.2};
  const std::string text = to_text(c);
  const PipelineConfig back = parse_config(text);
  EXPECT_EQ(to_text(back), text);
  EXPECT_EQ(back.alpha_min, 0.05);
  EXPECT_EQ(back.rule, SelectionRule::Threshold);
  EXPECT_FALSE(back.degradation.blur.has_value());
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    parse_config("taau = 0.2\n");
    FAIL() << "accepted unknown key";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("taau"), std::string::npos);
  }
}

TEST(Config, BadValuesAreConfigErrors) {
  EXPECT_THROW(parse_config("selection.tau = abc\n"), ConfigError);
  EXPECT_THROW(parse_config("selection.tau = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("selection.rule = fancy\n"), ConfigError);
  EXPECT_THROW(parse_config("degradation.blur_kernel = 4\n"), ConfigError);
  EXPECT_THROW(parse_config("denoiser.mixture = 0.5:1:0.1\n"), ConfigError);
  EXPECT_THROW(parse_config("no equals sign\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/run.cfg"), ConfigError);
}

TEST(Config, HashMatchesSavedFileDigest) {
  PipelineConfig c;
  c.seed = 9;
  const auto dir = temp_dir("hash");
  save_config(dir / "run.cfg", c);
  const auto bytes = read_file_bytes(dir / "run.cfg");
  EXPECT_EQ(fnv1a_hex(std::string(bytes.begin(), bytes.end())), config_hash(load_config(dir / "run.cfg")));
  fs::remove_all(dir);
}

TEST(Config, HashChangesWithAnyDegradationField) {
  const DegradationSpec base = DegradationSpec::heaviest();
  std::vector<DegradationSpec> variants(6, base);
  variants[0].downsample_factor = 8;
  variants[1].noise_sigma = 0.04;
  variants[2].blur->sigma = 0.6;
  variants[3].removal_fraction = 0.2;
  variants[4].quantization_step = 0.05;
  variants[5].seed = 1;
  for (const auto& v : variants) EXPECT_NE(degradation_hash(v), degradation_hash(base));
}
