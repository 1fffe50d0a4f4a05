#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ctfem/ctf.hpp"
#include "ctfem/grid.hpp"
#include "ctfem/prior.hpp"
#include "ctfem/stft.hpp"

namespace ctfem {

struct EmConfig {
  /// CTF order P; filters carry P + 1 taps.
  std::size_t ctf_order = 30;
  std::size_t iterations = 100;
  /// Initial noise power is noise_init_scale * |X_f|^2 / N.
  double noise_init_scale = 1e3;
  Complex h0_init{1.0, 0.0};
  /// Noise floor as a fraction of the mean observed power.
  double noise_floor_rel = 1e-8;
  double prior_floor = kDefaultPriorFloor;
  bool likelihood_tracking = true;
  /// Worker threads for the per-band loops; 0 picks the hardware count.
  unsigned workers = 1;

  /// Throws InvalidInput when the configuration cannot process `frames`.
  void validate(std::size_t frames) const;
};

/// Gaussian posterior of the clean spectrogram, one independent band at a time.
/// Only the central band of each posterior covariance is kept:
/// cov_band(f, d, n) = Sigma_f(n, n - d) for d = 0..order, n >= d.
struct PosteriorStats {
  ComplexGrid mean;
  std::size_t order = 0;
  std::vector<Complex> cov;
  /// ln p(X_f) under the parameters the posterior was computed with.
  std::vector<double> log_evidence;
  /// Bands that only factorised after their floors were raised.
  std::vector<std::size_t> retried_bands;

  PosteriorStats() = default;
  PosteriorStats(std::size_t bands, std::size_t frames, std::size_t order);

  std::size_t bands() const noexcept { return mean.rows(); }
  std::size_t frames() const noexcept { return mean.cols(); }

  Complex& cov_band(std::size_t f, std::size_t d, std::size_t n) {
    return cov[(f * (order + 1) + d) * frames() + n];
  }
  Complex cov_band(std::size_t f, std::size_t d, std::size_t n) const {
    return cov[(f * (order + 1) + d) * frames() + n];
  }

  /// Sigma_f(n, m) for |n - m| <= order, using Hermitian symmetry.
  Complex covariance(std::size_t f, std::size_t n, std::size_t m) const;
};

struct EmState {
  EmConfig config;
  CtfFilter ctf;
  NoiseVariance noise;
  PriorVariance prior;
  ComplexGrid observed;
  /// Absolute noise floor resolved from config.noise_floor_rel.
  double noise_floor = 0.0;
  /// Surrogate objective after each M-step (see surrogate_objective).
  std::vector<double> history;
  /// Exact ln p(X; psi) at each E-step, the quantity EM never decreases.
  std::vector<double> evidence;
  std::vector<std::string> warnings;
};

EmState init_state(const Spectrogram& x, const PriorVariance& prior, const EmConfig& cfg);

/// Per band: J = H^H H / sigma2 + diag(prior)^-1, mean = J^-1 H^H X / sigma2,
/// cov_band = band of J^-1. Banded Cholesky plus selected inversion, O(N P^2).
/// A band whose factorisation fails is retried once with raised floors, then
/// reported as NumericalError carrying the band index.
PosteriorStats e_step(const EmState& state);

/// Closed-form CTF update: H_f solves
/// H_f sum_n Stilde_f(n) = sum_n X_f(n) mu_f(n:n-P)^H.
/// Bands whose normal matrix is singular get a ridge of
/// 1e-10 * trace / (P + 1); their indices are appended to `regularized`.
CtfFilter m_step_ctf(const EmState& state, const PosteriorStats& post,
                     std::vector<std::size_t>* regularized = nullptr);

/// sigma2_f = (|X_f - H_f mu_f|^2 + tr(H_f Sigma_f H_f^H)) / N, at least the floor.
NoiseVariance m_step_noise(const EmState& state, const PosteriorStats& post,
                           const CtfFilter& ctf_new);

/// sum_f [-N ln(pi sigma2_f) - (|X_f - H_f mu_f|^2 + tr(H_f Sigma_f H_f^H)) / sigma2_f],
/// the part of the expected complete-data log-likelihood that depends on
/// (ctf, noise), evaluated under a fixed posterior.
double surrogate_objective(const ComplexGrid& observed, const PosteriorStats& post,
                           const CtfFilter& ctf, const NoiseVariance& noise,
                           unsigned workers = 1);

struct EmResult {
  Spectrogram estimate;
  EmState state;
  /// Posterior under the final parameters; estimate.bins == posterior.mean.
  PosteriorStats posterior;
};

/// Runs cfg.iterations rounds of e_step, m_step_ctf, m_step_noise, then one
/// closing E-step under the final parameters.
EmResult run_em(const Spectrogram& x, const PriorVariance& prior, const EmConfig& cfg);

}  // namespace ctfem
