#include "ctfem/prior.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ctfem/errors.hpp"

namespace ctfem {

static_assert(std::endian::native == std::endian::little,
              "prior file I/O assumes a little-endian host");

void PriorVariance::clamp_to(double floor) {
  for (double& v : var.values()) v = std::max(v, floor);
}

PriorVariance heuristic_prior(const Spectrogram& x, double smoothing, double floor) {
  if (!(smoothing > 0.0 && smoothing <= 1.0)) {
    throw InvalidInput("prior smoothing must be in (0, 1], got " + std::to_string(smoothing));
  }
  PriorVariance p{RealGrid(x.bands(), x.frames())};
  for (std::size_t f = 0; f < x.bands(); ++f) {
    double v = 0.0;
    for (std::size_t n = 0; n < x.frames(); ++n) {
      const double power = std::norm(x.bins(f, n));
      v = n == 0 ? power : (1.0 - smoothing) * v + smoothing * power;
      p.var(f, n) = std::max(v, floor);
    }
  }
  return p;
}

PriorVariance constant_prior(std::size_t bands, std::size_t frames, double value,
                             double floor) {
  if (!std::isfinite(value) || value < 0.0) {
    throw InvalidInput("constant prior must be finite and non-negative");
  }
  return PriorVariance{RealGrid(bands, frames, std::max(value, floor))};
}

PriorVariance load_prior(const std::filesystem::path& path, double floor) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read prior file: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const auto fail = [&](const std::string& why) {
    throw FormatError(path.string() + ": " + why);
  };
  if (buf.size() < kPriorHeaderBytes) fail("truncated header");
  if (std::memcmp(buf.data(), kPriorMagic, 4) != 0) fail("bad magic, expected SPRV");
  std::uint32_t version, bands, frames;
  std::memcpy(&version, buf.data() + 4, 4);
  std::memcpy(&bands, buf.data() + 8, 4);
  std::memcpy(&frames, buf.data() + 12, 4);
  if (version != kPriorVersion) fail("unsupported version " + std::to_string(version));

  const std::size_t expected = kPriorHeaderBytes + std::size_t{bands} * frames * 4;
  if (buf.size() < expected) fail("truncated payload");
  if (buf.size() > expected) fail("trailing bytes after payload");

  PriorVariance p{RealGrid(bands, frames)};
  const char* at = buf.data() + kPriorHeaderBytes;
  for (std::size_t f = 0; f < bands; ++f) {
    for (std::size_t n = 0; n < frames; ++n, at += 4) {
      float v;
      std::memcpy(&v, at, 4);
      if (!std::isfinite(v) || v < 0.0f) {
        throw DataError(path.string() + ": invalid prior value " + std::to_string(v) +
                        " at (f=" + std::to_string(f) + ", n=" + std::to_string(n) + ")");
      }
      p.var(f, n) = std::max(static_cast<double>(v), floor);
    }
  }
  return p;
}

void save_prior(const PriorVariance& prior, const std::filesystem::path& path) {
  std::vector<char> buf(kPriorHeaderBytes + prior.var.size() * 4);
  const auto bands = static_cast<std::uint32_t>(prior.bands());
  const auto frames = static_cast<std::uint32_t>(prior.frames());
  std::memcpy(buf.data(), kPriorMagic, 4);
  std::memcpy(buf.data() + 4, &kPriorVersion, 4);
  std::memcpy(buf.data() + 8, &bands, 4);
  std::memcpy(buf.data() + 12, &frames, 4);
  char* at = buf.data() + kPriorHeaderBytes;
  for (double v : prior.var.values()) {
    const auto narrowed = static_cast<float>(v);
    std::memcpy(at, &narrowed, 4);
    at += 4;
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open prior file for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace ctfem
