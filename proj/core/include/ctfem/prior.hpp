#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ctfem/grid.hpp"
#include "ctfem/stft.hpp"

namespace ctfem {

inline constexpr double kDefaultPriorFloor = 1e-10;

/// Clean-speech prior variance per time-frequency bin, var(f, n) > 0.
struct PriorVariance {
  RealGrid var;

  std::size_t bands() const noexcept { return var.rows(); }
  std::size_t frames() const noexcept { return var.cols(); }

  /// Raises every entry to at least floor.
  void clamp_to(double floor);
};

/// First-order recursive average of |x|^2 along time:
/// v(0) = |x(0)|^2, v(n) = (1 - smoothing) v(n-1) + smoothing |x(n)|^2,
/// clamped at floor. smoothing must be in (0, 1].
PriorVariance heuristic_prior(const Spectrogram& x, double smoothing,
                              double floor = kDefaultPriorFloor);

PriorVariance constant_prior(std::size_t bands, std::size_t frames, double value,
                             double floor = kDefaultPriorFloor);

// Prior file layout, little-endian:
//   "SPRV" | u32 version (1) | u32 F | u32 N | F*N float32, band-major.
inline constexpr char kPriorMagic[4] = {'S', 'P', 'R', 'V'};
inline constexpr std::uint32_t kPriorVersion = 1;
inline constexpr std::size_t kPriorHeaderBytes = 16;

/// Negative or non-finite values raise DataError naming (f, n); values below
/// floor, zero included, are clamped. A missing or malformed file raises
/// FormatError and nothing is returned.
PriorVariance load_prior(const std::filesystem::path& path, double floor = kDefaultPriorFloor);

/// Values are narrowed to float32.
void save_prior(const PriorVariance& prior, const std::filesystem::path& path);

}  // namespace ctfem
