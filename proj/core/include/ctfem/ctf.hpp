#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ctfem/grid.hpp"
#include "ctfem/stft.hpp"

namespace ctfem {

/// Per-band convolutive transfer function: coeffs(f, p) is tap p of band f,
/// p = 0..order().
struct CtfFilter {
  ComplexGrid coeffs;

  /// coeffs(f, 0) = h0 and every later tap zero.
  static CtfFilter identity(std::size_t bands, std::size_t order, Complex h0 = 1.0);

  std::size_t bands() const noexcept { return coeffs.rows(); }
  std::size_t order() const noexcept { return coeffs.cols() == 0 ? 0 : coeffs.cols() - 1; }
  std::span<const Complex> taps(std::size_t band) const { return coeffs.row(band); }

  void validate() const;
};

/// Per-band stationary noise power.
struct NoiseVariance {
  std::vector<double> power;
};

/// Implicit N x N lower-triangular Toeplitz convolution matrix whose first
/// column is [h(0), ..., h(P), 0, ..., 0]. Never stored densely.
class BandedLowerToeplitz {
 public:
  BandedLowerToeplitz(std::span<const Complex> taps, std::size_t size);

  std::size_t size() const noexcept { return size_; }
  std::size_t bandwidth() const noexcept { return taps_.size() - 1; }
  std::span<const Complex> taps() const noexcept { return taps_; }

  /// Matrix element (row, col), zero outside the band.
  Complex entry(std::size_t row, std::size_t col) const;

  /// out = H x.
  void multiply(std::span<const Complex> x, std::span<Complex> out) const;
  /// out = H^H x.
  void multiply_adjoint(std::span<const Complex> x, std::span<Complex> out) const;

  std::vector<Complex> operator*(std::span<const Complex> x) const;

 private:
  std::vector<Complex> taps_;
  std::size_t size_;
};

BandedLowerToeplitz build_banded_convolution(std::span<const Complex> taps,
                                             std::size_t frames);

/// out(f, n) = sum_p s(f, n - p) h(f, p), with frames before the start
/// treated as silent.
ComplexGrid apply_ctf(const CtfFilter& h, const ComplexGrid& s);
Spectrogram apply_ctf(const CtfFilter& h, const Spectrogram& s);

/// ln CN(x; H s, sigma2 I) under the circularly-symmetric convention:
/// -N ln(pi sigma2) - |x - H s|^2 / sigma2.
double observation_loglik(std::span<const Complex> x, std::span<const Complex> s,
                          std::span<const Complex> taps, double sigma2);

/// Sum of observation_loglik over bands.
double observation_loglik(const ComplexGrid& x, const ComplexGrid& s, const CtfFilter& h,
                          const NoiseVariance& noise);

}  // namespace ctfem
