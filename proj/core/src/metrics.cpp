#include "ctfem/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "ctfem/errors.hpp"

namespace ctfem {

namespace {

template <typename T>
double sisdr_impl(std::span<const T> reference, std::span<const T> estimate) {
  if (reference.size() != estimate.size()) {
    throw ShapeError("sisdr: reference and estimate lengths differ");
  }
  if (reference.empty()) throw DomainError("sisdr: empty signals");

  double ref_energy = 0.0;
  T inner{};
  for (std::size_t i = 0; i < reference.size(); ++i) {
    ref_energy += std::norm(reference[i]);
    if constexpr (std::is_same_v<T, Complex>) {
      inner += std::conj(reference[i]) * estimate[i];
    } else {
      inner += reference[i] * estimate[i];
    }
  }
  if (!(ref_energy > 0.0)) throw DomainError("sisdr: reference is all zero");
  const T alpha = inner / ref_energy;

  double target = 0.0;
  double error = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const T projected = alpha * reference[i];
    target += std::norm(projected);
    error += std::norm(projected - estimate[i]);
  }
  // An estimate orthogonal to the reference (zero included) keeps nothing of it.
  if (target <= 0.0) return -kSisdrCapDb;
  if (error <= 0.0) return kSisdrCapDb;
  return std::clamp(10.0 * std::log10(target / error), -kSisdrCapDb, kSisdrCapDb);
}

void require_same_shape(const RealGrid& a, const RealGrid& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shapes differ");
  }
}

}  // namespace

double sisdr(std::span<const double> reference, std::span<const double> estimate) {
  return sisdr_impl(reference, estimate);
}

double sisdr(std::span<const Complex> reference, std::span<const Complex> estimate) {
  return sisdr_impl(reference, estimate);
}

double sisdr(const Waveform& reference, const Waveform& estimate) {
  return sisdr(std::span<const double>(reference.samples),
               std::span<const double>(estimate.samples));
}

double is_divergence(const RealGrid& power_a, const RealGrid& power_b) {
  require_same_shape(power_a, power_b, "is_divergence");
  const auto a = power_a.values();
  const auto b = power_b.values();
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] > 0.0) || !(b[i] > 0.0)) {
      throw DomainError("is_divergence: entries must be positive");
    }
    const double ratio = a[i] / b[i];
    total += ratio - std::log(ratio) - 1.0;
  }
  return total;
}

double kl_diag_gauss(const RealGrid& mean_q, const RealGrid& var_q) {
  require_same_shape(mean_q, var_q, "kl_diag_gauss");
  const auto m = mean_q.values();
  const auto v = var_q.values();
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(v[i] > 0.0)) throw DomainError("kl_diag_gauss: variances must be positive");
    total += v[i] + m[i] * m[i] - 1.0 - std::log(v[i]);
  }
  return 0.5 * total;
}

}  // namespace ctfem
