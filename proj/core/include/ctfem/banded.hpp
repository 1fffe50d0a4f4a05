#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ctfem/grid.hpp"

namespace ctfem {

/// Hermitian matrix of order n whose nonzeros satisfy |i - j| <= bandwidth.
/// Only the lower band is stored: lower(i, d) holds A(i, i - d) for
/// d = 0..bandwidth and i >= d. Row-major, (bandwidth + 1) slots per row;
/// slots with i < d are unused and kept at zero.
class HermitianBandMatrix {
 public:
  HermitianBandMatrix() = default;
  HermitianBandMatrix(std::size_t order, std::size_t bandwidth);

  std::size_t order() const noexcept { return order_; }
  std::size_t bandwidth() const noexcept { return bandwidth_; }

  Complex& lower(std::size_t row, std::size_t offset) {
    return data_[row * (bandwidth_ + 1) + offset];
  }
  Complex lower(std::size_t row, std::size_t offset) const {
    return data_[row * (bandwidth_ + 1) + offset];
  }

  /// A(i, j) for any i, j; zero outside the band.
  Complex operator()(std::size_t i, std::size_t j) const;

 private:
  std::size_t order_ = 0;
  std::size_t bandwidth_ = 0;
  std::vector<Complex> data_;
};

/// Cholesky factor A = L L^H of a Hermitian positive-definite band matrix.
/// L inherits the band of A, so factorisation costs O(n b^2) and each solve
/// O(n b), with b the bandwidth.
class BandCholesky {
 public:
  /// Throws NumericalError (no band attached) on a non-positive or
  /// non-finite pivot.
  explicit BandCholesky(const HermitianBandMatrix& a);

  std::size_t order() const noexcept { return factor_.order(); }
  std::size_t bandwidth() const noexcept { return factor_.bandwidth(); }

  /// L(i, i - d); the diagonal is real and positive.
  Complex factor(std::size_t row, std::size_t offset) const {
    return factor_.lower(row, offset);
  }

  /// Overwrites rhs with A^{-1} rhs.
  void solve_in_place(std::span<Complex> rhs) const;

  /// ln det A = 2 sum ln L(i, i).
  double log_determinant() const;

  /// The entries of A^{-1} inside the band of A, computed by the Takahashi
  /// recursion L^H Z = L^{-1} swept from the last row upwards. Each row
  /// only reads entries of Z already inside the band, so the cost is
  /// O(n b^2) and the dense inverse is never formed.
  HermitianBandMatrix selected_inverse() const;

 private:
  HermitianBandMatrix factor_;
};

}  // namespace ctfem
