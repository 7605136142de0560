#pragma once

// Grayscale portable float map ("Pf"): little-endian only, rows stored
// bottom to top, invalid pixels as quiet NaN.

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffdsr/depth_field.hpp"
#include "diffdsr/error.hpp"

namespace diffdsr {

class PfmError : public DataError {
 public:
  enum class Kind { Io, MalformedHeader, Truncated, UnsupportedEndianness };
  PfmError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline std::vector<std::uint8_t> encode_pfm(const ScalarField& values) {
  const std::string header =
      "Pf\n" + std::to_string(values.width()) + " " + std::to_string(values.height()) + "\n-1.0\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + values.size() * 4);
  for (std::size_t row = values.height(); row-- > 0;) {
    for (std::size_t x = 0; x < values.width(); ++x) {
      const double v = values(x, row);
      const float f = std::isnan(v) ? std::numeric_limits<float>::quiet_NaN() : static_cast<float>(v);
      const auto bits = std::bit_cast<std::uint32_t>(f);
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  }
  return out;
}

inline std::vector<std::uint8_t> encode_pfm(const DepthField& field) { return encode_pfm(field.values()); }

/// Raw float grid; NaN entries are preserved.
inline ScalarField decode_pfm_values(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto next_token = [&](bool last) {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
    if (start == pos || pos >= bytes.size())
      throw PfmError(PfmError::Kind::MalformedHeader, "pfm: truncated header");
    std::string token(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos));
    if (last) ++pos;  // exactly one whitespace byte before the payload
    return token;
  };
  const std::string magic = next_token(false);
  if (magic == "PF")
    throw PfmError(PfmError::Kind::MalformedHeader, "pfm: colour maps (PF) are not supported");
  if (magic != "Pf") throw PfmError(PfmError::Kind::MalformedHeader, "pfm: bad magic '" + magic + "'");

  auto parse_dim = [](const std::string& t) -> std::size_t {
    if (t.empty() || t.size() > 9) throw PfmError(PfmError::Kind::MalformedHeader, "pfm: bad dimension");
    for (char c : t)
      if (!std::isdigit(static_cast<unsigned char>(c)))
        throw PfmError(PfmError::Kind::MalformedHeader, "pfm: bad dimension '" + t + "'");
    const auto v = std::stoull(t);
    if (v == 0) throw PfmError(PfmError::Kind::MalformedHeader, "pfm: zero dimension");
    return static_cast<std::size_t>(v);
  };
  const std::size_t w = parse_dim(next_token(false));
  const std::size_t h = parse_dim(next_token(false));
  const std::string scale_text = next_token(true);
  double scale = 0.0;
  try {
    std::size_t used = 0;
    scale = std::stod(scale_text, &used);
    if (used != scale_text.size()) throw std::invalid_argument(scale_text);
  } catch (const std::exception&) {
    throw PfmError(PfmError::Kind::MalformedHeader, "pfm: bad scale '" + scale_text + "'");
  }
  if (!(std::isfinite(scale)) || scale == 0.0)
    throw PfmError(PfmError::Kind::MalformedHeader, "pfm: bad scale '" + scale_text + "'");
  if (scale > 0.0)
    throw PfmError(PfmError::Kind::UnsupportedEndianness, "pfm: big-endian payloads are not supported");

  const std::size_t need = w * h * 4;
  if (bytes.size() - pos < need) throw PfmError(PfmError::Kind::Truncated, "pfm: truncated payload");
  ScalarField out(w, h);
  for (std::size_t row = h; row-- > 0;) {
    for (std::size_t x = 0; x < w; ++x) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= std::uint32_t{bytes[pos++]} << (8 * b);
      out(x, row) = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return out;
}

inline DepthField decode_pfm(const std::vector<std::uint8_t>& bytes) {
  return DepthField(decode_pfm_values(bytes));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PfmError(PfmError::Kind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PfmError(PfmError::Kind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PfmError(PfmError::Kind::Io, "write failed for " + path.string());
}

inline DepthField read_pfm(const std::filesystem::path& path) { return decode_pfm(read_file_bytes(path)); }
inline ScalarField read_pfm_values(const std::filesystem::path& path) {
  return decode_pfm_values(read_file_bytes(path));
}
inline void write_pfm(const std::filesystem::path& path, const DepthField& field) {
  write_file_bytes(path, encode_pfm(field));
}
inline void write_pfm(const std::filesystem::path& path, const ScalarField& values) {
  write_file_bytes(path, encode_pfm(values));
}

}  // namespace diffdsr
