#include "ctfem/banded.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctfem/errors.hpp"

namespace ctfem {

HermitianBandMatrix::HermitianBandMatrix(std::size_t order, std::size_t bandwidth)
    : order_(order), bandwidth_(bandwidth), data_(order * (bandwidth + 1)) {}

Complex HermitianBandMatrix::operator()(std::size_t i, std::size_t j) const {
  if (i >= j) return i - j <= bandwidth_ ? lower(i, i - j) : Complex{};
  return j - i <= bandwidth_ ? std::conj(lower(j, j - i)) : Complex{};
}

BandCholesky::BandCholesky(const HermitianBandMatrix& a)
    : factor_(a.order(), a.bandwidth()) {
  const std::size_t n = a.order();
  const std::size_t b = a.bandwidth();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t first = i >= b ? i - b : 0;
    for (std::size_t j = first; j <= i; ++j) {
      // s = A(i, j) - sum_{k < j} L(i, k) conj(L(j, k)), k inside both bands.
      Complex s = a.lower(i, i - j);
      for (std::size_t k = first; k < j; ++k) {
        s -= factor_.lower(i, i - k) * std::conj(factor_.lower(j, j - k));
      }
      if (j < i) {
        factor_.lower(i, i - j) = s / factor_.lower(j, 0).real();
      } else {
        const double pivot = s.real();
        if (!(pivot > 0.0) || !std::isfinite(pivot)) {
          throw NumericalError("band Cholesky: non-positive pivot " + std::to_string(pivot) +
                               " at row " + std::to_string(i));
        }
        factor_.lower(i, 0) = std::sqrt(pivot);
      }
    }
  }
}

void BandCholesky::solve_in_place(std::span<Complex> rhs) const {
  const std::size_t n = order();
  const std::size_t b = bandwidth();
  if (rhs.size() != n) throw ShapeError("band solve: right-hand side length mismatch");

  // L y = rhs
  for (std::size_t i = 0; i < n; ++i) {
    Complex s = rhs[i];
    const std::size_t first = i >= b ? i - b : 0;
    for (std::size_t k = first; k < i; ++k) s -= factor_.lower(i, i - k) * rhs[k];
    rhs[i] = s / factor_.lower(i, 0).real();
  }
  // L^H x = y
  for (std::size_t i = n; i-- > 0;) {
    Complex s = rhs[i];
    const std::size_t last = std::min(n - 1, i + b);
    for (std::size_t k = i + 1; k <= last; ++k) s -= std::conj(factor_.lower(k, k - i)) * rhs[k];
    rhs[i] = s / factor_.lower(i, 0).real();
  }
}

double BandCholesky::log_determinant() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < order(); ++i) acc += std::log(factor_.lower(i, 0).real());
  return 2.0 * acc;
}

HermitianBandMatrix BandCholesky::selected_inverse() const {
  const std::size_t n = order();
  const std::size_t b = bandwidth();
  HermitianBandMatrix z(n, b);

  // Z(j, k) for |j - k| <= b, both rows already swept.
  const auto zget = [&z](std::size_t j, std::size_t k) -> Complex {
    return j >= k ? z.lower(j, j - k) : std::conj(z.lower(k, k - j));
  };

  for (std::size_t i = n; i-- > 0;) {
    const double lii = factor_.lower(i, 0).real();
    const std::size_t last = std::min(n - 1, i + b);
    // Off-diagonal entries first: Z(j, i) for j = i+1..last only reads rows > i.
    for (std::size_t j = last; j > i; --j) {
      Complex s = 0.0;
      for (std::size_t k = i + 1; k <= last; ++k) s += factor_.lower(k, k - i) * zget(j, k);
      z.lower(j, j - i) = -s / lii;
    }
    Complex s = 0.0;
    for (std::size_t k = i + 1; k <= last; ++k) s += factor_.lower(k, k - i) * zget(i, k);
    z.lower(i, 0) = Complex((1.0 / lii - s.real()) / lii, 0.0);
  }
  return z;
}

}  // namespace ctfem
