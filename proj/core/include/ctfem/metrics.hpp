#pragma once

#include <span>
#include <string>

#include "ctfem/grid.hpp"
#include "ctfem/stft.hpp"

namespace ctfem {

/// Reported SISDR never exceeds this magnitude.
inline constexpr double kSisdrCapDb = 100.0;

struct MetricReport {
  double sisdr_db = 0.0;
  double is_divergence = 0.0;
  std::string notes;
};

/// Scale-invariant SDR in dB: the estimate is projected onto the reference,
/// alpha = <est, ref> / |ref|^2, and the result is
/// 10 log10(|alpha ref|^2 / |alpha ref - est|^2), clamped to +-kSisdrCapDb.
double sisdr(const Waveform& reference, const Waveform& estimate);
double sisdr(std::span<const double> reference, std::span<const double> estimate);

/// Complex variant with a complex projection coefficient; used to score
/// spectrograms directly.
double sisdr(std::span<const Complex> reference, std::span<const Complex> estimate);

/// Itakura-Saito divergence sum(a/b - ln(a/b) - 1).
double is_divergence(const RealGrid& power_a, const RealGrid& power_b);

/// KL(N(mean, var) || N(0, 1)) summed over entries:
/// 0.5 * sum(var + mean^2 - 1 - ln var).
double kl_diag_gauss(const RealGrid& mean_q, const RealGrid& var_q);

}  // namespace ctfem
