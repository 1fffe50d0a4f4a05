#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "ctfem/stft.hpp"

namespace ctfem::testing {

struct ReverbPair {
  Waveform clean;
  Waveform reverberant;
};

/// Speech-like test signal: harmonic bursts with random pitch under a
/// syllabic envelope, convolved with an exponentially decaying noise room
/// response (rt60 seconds) and topped with a little white noise.
inline ReverbPair make_reverb_pair(double seconds, double rt60, std::uint64_t seed,
                                   int sample_rate = 16000) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto length = static_cast<std::size_t>(seconds * sample_rate);
  const double fs = sample_rate;

  ReverbPair out;
  out.clean.sample_rate = sample_rate;
  out.clean.samples.assign(length, 0.0);
  const std::size_t syllable = static_cast<std::size_t>(0.18 * fs);
  for (std::size_t start = 0; start < length; start += syllable) {
    const double f0 = 100.0 + 120.0 * u(rng);
    const double gain = u(rng) < 0.2 ? 0.0 : 0.3 + 0.7 * u(rng);
    for (std::size_t t = start; t < std::min(length, start + syllable); ++t) {
      const double local = static_cast<double>(t - start) / static_cast<double>(syllable);
      const double env = std::sin(std::numbers::pi * local);
      double v = 0.0;
      for (int k = 1; k <= 12; ++k) {
        v += std::sin(2.0 * std::numbers::pi * f0 * k * static_cast<double>(t) / fs) / k;
      }
      out.clean.samples[t] = 0.1 * gain * env * v;
    }
  }

  const auto rir_len = static_cast<std::size_t>(rt60 * fs);
  std::vector<double> rir(rir_len);
  for (std::size_t t = 0; t < rir_len; ++t) {
    rir[t] = g(rng) * std::exp(-6.9 * static_cast<double>(t) / (rt60 * fs)) * 0.15;
  }
  if (!rir.empty()) rir[0] = 1.0;

  out.reverberant = out.clean;
  for (std::size_t t = 0; t < length; ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < rir_len && k <= t; ++k) acc += rir[k] * out.clean.samples[t - k];
    out.reverberant.samples[t] = acc + 1e-4 * g(rng);
  }
  return out;
}

}  // namespace ctfem::testing
