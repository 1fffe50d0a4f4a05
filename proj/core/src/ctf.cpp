#include "ctfem/ctf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ctfem/errors.hpp"

namespace ctfem {

CtfFilter CtfFilter::identity(std::size_t bands, std::size_t order, Complex h0) {
  CtfFilter h;
  h.coeffs = ComplexGrid(bands, order + 1);
  for (std::size_t f = 0; f < bands; ++f) h.coeffs(f, 0) = h0;
  return h;
}

void CtfFilter::validate() const {
  if (coeffs.cols() == 0) throw ShapeError("CTF filter needs at least one tap");
  for (Complex c : coeffs.values()) {
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
      throw InvalidInput("CTF filter has non-finite coefficients");
    }
  }
}

BandedLowerToeplitz::BandedLowerToeplitz(std::span<const Complex> taps, std::size_t size)
    : taps_(taps.begin(), taps.end()), size_(size) {
  if (taps_.empty()) throw ShapeError("convolution needs at least one tap");
  if (size_ == 0) throw ShapeError("convolution size must be positive");
}

Complex BandedLowerToeplitz::entry(std::size_t row, std::size_t col) const {
  if (row >= size_ || col >= size_) throw ShapeError("entry index out of range");
  if (col > row || row - col >= taps_.size()) return 0.0;
  return taps_[row - col];
}

void BandedLowerToeplitz::multiply(std::span<const Complex> x, std::span<Complex> out) const {
  if (x.size() != size_ || out.size() != size_) throw ShapeError("multiply: length mismatch");
  const std::size_t order = bandwidth();
  for (std::size_t n = 0; n < size_; ++n) {
    Complex acc = 0.0;
    const std::size_t pmax = std::min(order, n);
    for (std::size_t p = 0; p <= pmax; ++p) acc += taps_[p] * x[n - p];
    out[n] = acc;
  }
}

void BandedLowerToeplitz::multiply_adjoint(std::span<const Complex> x,
                                           std::span<Complex> out) const {
  if (x.size() != size_ || out.size() != size_) {
    throw ShapeError("multiply_adjoint: length mismatch");
  }
  const std::size_t order = bandwidth();
  for (std::size_t j = 0; j < size_; ++j) {
    Complex acc = 0.0;
    const std::size_t pmax = std::min(order, size_ - 1 - j);
    for (std::size_t p = 0; p <= pmax; ++p) acc += std::conj(taps_[p]) * x[j + p];
    out[j] = acc;
  }
}

std::vector<Complex> BandedLowerToeplitz::operator*(std::span<const Complex> x) const {
  std::vector<Complex> out(size_);
  multiply(x, out);
  return out;
}

BandedLowerToeplitz build_banded_convolution(std::span<const Complex> taps,
                                             std::size_t frames) {
  return BandedLowerToeplitz(taps, frames);
}

ComplexGrid apply_ctf(const CtfFilter& h, const ComplexGrid& s) {
  if (h.bands() != s.rows()) {
    throw ShapeError("CTF has " + std::to_string(h.bands()) + " bands, spectrogram has " +
                     std::to_string(s.rows()));
  }
  if (s.cols() == 0) throw ShapeError("spectrogram has no frames");
  ComplexGrid out(s.rows(), s.cols());
  for (std::size_t f = 0; f < s.rows(); ++f) {
    BandedLowerToeplitz(h.taps(f), s.cols()).multiply(s.row(f), out.row(f));
  }
  return out;
}

Spectrogram apply_ctf(const CtfFilter& h, const Spectrogram& s) {
  Spectrogram out = s;
  out.bins = apply_ctf(h, s.bins);
  return out;
}

double observation_loglik(std::span<const Complex> x, std::span<const Complex> s,
                          std::span<const Complex> taps, double sigma2) {
  if (!(sigma2 > 0.0)) throw DomainError("noise variance must be positive");
  if (x.size() != s.size()) throw ShapeError("observation and source lengths differ");
  const std::size_t frames = x.size();
  if (frames == 0) return 0.0;
  const auto predicted = BandedLowerToeplitz(taps, frames) * s;
  double residual = 0.0;
  for (std::size_t n = 0; n < frames; ++n) residual += std::norm(x[n] - predicted[n]);
  return -static_cast<double>(frames) * std::log(std::numbers::pi * sigma2) - residual / sigma2;
}

double observation_loglik(const ComplexGrid& x, const ComplexGrid& s, const CtfFilter& h,
                          const NoiseVariance& noise) {
  if (x.rows() != s.rows() || x.cols() != s.cols() || h.bands() != x.rows() ||
      noise.power.size() != x.rows()) {
    throw ShapeError("observation_loglik: inconsistent shapes");
  }
  double total = 0.0;
  for (std::size_t f = 0; f < x.rows(); ++f) {
    total += observation_loglik(x.row(f), s.row(f), h.taps(f), noise.power[f]);
  }
  return total;
}

}  // namespace ctfem
