#include "ctfem/em.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ctfem/banded.hpp"
#include "ctfem/errors.hpp"
#include "ctfem/parallel.hpp"

namespace ctfem {

namespace {

unsigned resolve_workers(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

struct BandPosterior {
  std::vector<Complex> mean;
  HermitianBandMatrix cov;
  double log_evidence = 0.0;
};

// Posterior of one band given its taps, noise power and prior variances.
BandPosterior solve_band(std::span<const Complex> x, std::span<const Complex> taps,
                         double sigma2, std::span<const double> prior) {
  const std::size_t frames = x.size();
  const std::size_t order = taps.size() - 1;

  // partial[d][t] = sum_{q=0..t} conj(h(q)) h(q + d): the lag-d autocorrelation
  // of the taps, truncated where the convolution runs past the last frame.
  std::vector<std::vector<Complex>> partial(order + 1);
  for (std::size_t d = 0; d <= order; ++d) {
    partial[d].resize(order - d + 1);
    Complex acc = 0.0;
    for (std::size_t q = 0; q + d <= order; ++q) {
      acc += std::conj(taps[q]) * taps[q + d];
      partial[d][q] = acc;
    }
  }

  HermitianBandMatrix precision(frames, order);
  const double inv_sigma2 = 1.0 / sigma2;
  for (std::size_t i = 0; i < frames; ++i) {
    const std::size_t dmax = std::min(order, i);
    for (std::size_t d = 0; d <= dmax; ++d) {
      const std::size_t t = std::min(frames - 1 - i, order - d);
      precision.lower(i, d) = partial[d][t] * inv_sigma2;
    }
    precision.lower(i, 0) += 1.0 / prior[i];
  }

  BandPosterior out;
  out.mean.resize(frames);
  BandedLowerToeplitz(taps, frames).multiply_adjoint(x, out.mean);
  for (Complex& v : out.mean) v *= inv_sigma2;
  const std::vector<Complex> rhs = out.mean;

  const BandCholesky chol(precision);
  chol.solve_in_place(out.mean);
  out.cov = chol.selected_inverse();

  // ln p(x) for x ~ CN(0, sigma2 I + H D H^H), by the determinant lemma and
  // Woodbury identity on the factorised precision.
  double energy = 0.0;
  double log_prior = 0.0;
  Complex cross = 0.0;
  for (std::size_t n = 0; n < frames; ++n) {
    energy += std::norm(x[n]);
    log_prior += std::log(prior[n]);
    cross += std::conj(rhs[n]) * out.mean[n];
  }
  const auto nf = static_cast<double>(frames);
  const double log_det = nf * std::log(sigma2) + log_prior + chol.log_determinant();
  const double quad = energy * inv_sigma2 - cross.real();
  out.log_evidence = -nf * std::log(std::numbers::pi) - log_det - quad;
  return out;
}

// Covariance block sum C = sum_n Sigma(n:n-P, n:n-P), entries below frame 0 zero.
Eigen::MatrixXcd covariance_block_sum(const PosteriorStats& post, std::size_t f,
                                      std::size_t order) {
  const std::size_t frames = post.frames();
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(order + 1),
                                              static_cast<Eigen::Index>(order + 1));
  for (std::size_t p = 0; p <= order; ++p) {
    for (std::size_t q = 0; q <= p; ++q) {
      // Sigma(n - p, n - q) with n - p >= 0: row n - q sits p - q below col n - p.
      Complex acc = 0.0;
      for (std::size_t n = p; n < frames; ++n) {
        acc += post.cov_band(f, p - q, n - q);
      }
      // Stored as Sigma(n - q, n - p); the (p, q) slot wants Sigma(n - p, n - q).
      c(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) = std::conj(acc);
      c(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p)) = acc;
    }
  }
  return c;
}

struct ResidualTerms {
  double residual = 0.0;
  double trace = 0.0;
};

ResidualTerms band_residual(std::span<const Complex> x, std::span<const Complex> mean,
                            std::span<const Complex> taps, const PosteriorStats& post,
                            std::size_t f) {
  const std::size_t frames = x.size();
  const std::size_t order = taps.size() - 1;
  ResidualTerms out;
  const auto predicted = BandedLowerToeplitz(taps, frames) * mean;
  for (std::size_t n = 0; n < frames; ++n) out.residual += std::norm(x[n] - predicted[n]);

  const Eigen::MatrixXcd c = covariance_block_sum(post, f, order);
  Eigen::VectorXcd h(static_cast<Eigen::Index>(order + 1));
  for (std::size_t p = 0; p <= order; ++p) h(static_cast<Eigen::Index>(p)) = taps[p];
  // h is a row vector in the model; tr(H Sigma H^H) = h C h^H.
  out.trace = std::max(0.0, (h.transpose() * c * h.conjugate())(0, 0).real());
  return out;
}

}  // namespace

void EmConfig::validate(std::size_t frames) const {
  if (iterations < 1) throw InvalidInput("EM needs at least one iteration");
  if (ctf_order >= frames) {
    throw InvalidInput("CTF order P = " + std::to_string(ctf_order) +
                       " must be smaller than the frame count " + std::to_string(frames));
  }
  if (!(noise_init_scale > 0.0)) throw InvalidInput("noise_init_scale must be positive");
  if (!(noise_floor_rel > 0.0) || !(prior_floor > 0.0)) {
    throw InvalidInput("numerical floors must be positive");
  }
  if (!std::isfinite(h0_init.real()) || !std::isfinite(h0_init.imag())) {
    throw InvalidInput("h0_init must be finite");
  }
}

PosteriorStats::PosteriorStats(std::size_t bands, std::size_t frames, std::size_t order)
    : mean(bands, frames),
      order(order),
      cov(bands * (order + 1) * frames),
      log_evidence(bands, 0.0) {}

Complex PosteriorStats::covariance(std::size_t f, std::size_t n, std::size_t m) const {
  if (n >= m) {
    if (n - m > order) throw ShapeError("covariance entry outside the stored band");
    return cov_band(f, n - m, n);
  }
  if (m - n > order) throw ShapeError("covariance entry outside the stored band");
  return std::conj(cov_band(f, m - n, m));
}

EmState init_state(const Spectrogram& x, const PriorVariance& prior, const EmConfig& cfg) {
  const std::size_t bands = x.bands();
  const std::size_t frames = x.frames();
  if (prior.bands() != bands || prior.frames() != frames) {
    throw ShapeError("prior is " + std::to_string(prior.bands()) + "x" +
                     std::to_string(prior.frames()) + ", observation is " +
                     std::to_string(bands) + "x" + std::to_string(frames));
  }
  cfg.validate(frames);

  EmState state;
  state.config = cfg;
  state.observed = x.bins;
  state.prior = prior;
  state.prior.clamp_to(cfg.prior_floor);
  state.ctf = CtfFilter::identity(bands, cfg.ctf_order, cfg.h0_init);

  double total = 0.0;
  for (Complex v : x.bins.values()) total += std::norm(v);
  const double mean_power = x.bins.empty() ? 0.0 : total / static_cast<double>(x.bins.size());
  state.noise_floor = cfg.noise_floor_rel * (mean_power > 0.0 ? mean_power : 1.0);

  state.noise.power.resize(bands);
  for (std::size_t f = 0; f < bands; ++f) {
    double energy = 0.0;
    for (Complex v : x.bins.row(f)) energy += std::norm(v);
    state.noise.power[f] = std::max(
        state.noise_floor, cfg.noise_init_scale * energy / static_cast<double>(frames));
  }
  return state;
}

PosteriorStats e_step(const EmState& state) {
  const std::size_t bands = state.observed.rows();
  const std::size_t frames = state.observed.cols();
  const std::size_t order = state.ctf.order();
  if (state.ctf.bands() != bands || state.noise.power.size() != bands ||
      state.prior.bands() != bands || state.prior.frames() != frames) {
    throw ShapeError("e_step: state shapes are inconsistent");
  }
  if (order >= frames) throw InvalidInput("CTF order must be smaller than the frame count");

  PosteriorStats post(bands, frames, order);
  std::vector<char> retried(bands, 0);

  const auto store = [&](std::size_t f, const BandPosterior& bp) {
    std::copy(bp.mean.begin(), bp.mean.end(), post.mean.row(f).begin());
    for (std::size_t d = 0; d <= order; ++d) {
      for (std::size_t n = d; n < frames; ++n) post.cov_band(f, d, n) = bp.cov.lower(n, d);
    }
    post.log_evidence[f] = bp.log_evidence;
  };

  parallel_for(bands, resolve_workers(state.config.workers), [&](std::size_t f) {
    const auto x = state.observed.row(f);
    const auto prior = state.prior.var.row(f);
    try {
      store(f, solve_band(x, state.ctf.taps(f), state.noise.power[f], prior));
      return;
    } catch (const NumericalError&) {
    }
    // Retry with floors raised relative to this band's own scale.
    double energy = 0.0;
    for (Complex v : x) energy += std::norm(v);
    const double band_power = energy > 0.0 ? energy / static_cast<double>(frames) : 1.0;
    const double sigma2 = std::max(state.noise.power[f], 1e-6 * band_power);
    const double prior_max = *std::max_element(prior.begin(), prior.end());
    std::vector<double> raised(prior.begin(), prior.end());
    for (double& v : raised) v = std::max(v, 1e-6 * prior_max);
    try {
      store(f, solve_band(x, state.ctf.taps(f), sigma2, raised));
      retried[f] = 1;
    } catch (const NumericalError& e) {
      throw NumericalError("E-step failed in band " + std::to_string(f) + ": " + e.what(), f);
    }
  });

  for (std::size_t f = 0; f < bands; ++f) {
    if (retried[f]) post.retried_bands.push_back(f);
  }
  return post;
}

CtfFilter m_step_ctf(const EmState& state, const PosteriorStats& post,
                     std::vector<std::size_t>* regularized) {
  const std::size_t bands = state.observed.rows();
  const std::size_t frames = state.observed.cols();
  const std::size_t order = state.ctf.order();
  if (post.bands() != bands || post.frames() != frames || post.order < order) {
    throw ShapeError("m_step_ctf: posterior does not match state");
  }
  const auto dim = static_cast<Eigen::Index>(order + 1);

  CtfFilter out;
  out.coeffs = ComplexGrid(bands, order + 1);
  std::vector<char> ridged(bands, 0);

  parallel_for(bands, resolve_workers(state.config.workers), [&](std::size_t f) {
    const auto x = state.observed.row(f);
    const auto mu = post.mean.row(f);

    // normal = sum_n v_n v_n^H + C, rhs = sum_n v_n conj(X(n)),
    // where v_n = [mu(n), mu(n-1), ..., mu(n-P)]^T.
    Eigen::MatrixXcd normal = covariance_block_sum(post, f, order);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(dim);
    for (std::size_t n = 0; n < frames; ++n) {
      const std::size_t pmax = std::min(order, n);
      for (std::size_t p = 0; p <= pmax; ++p) {
        const Complex vp = mu[n - p];
        rhs(static_cast<Eigen::Index>(p)) += vp * std::conj(x[n]);
        for (std::size_t q = 0; q <= pmax; ++q) {
          normal(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) +=
              vp * std::conj(mu[n - q]);
        }
      }
    }

    Eigen::LLT<Eigen::MatrixXcd> llt(normal);
    const bool singular = llt.info() != Eigen::Success || !(llt.rcond() > 1e-14);
    if (singular) {
      const double trace = normal.trace().real();
      if (!(trace > 0.0)) {
        // Nothing to fit against: keep the current filter.
        for (std::size_t p = 0; p <= order; ++p) out.coeffs(f, p) = state.ctf.coeffs(f, p);
        ridged[f] = 1;
        return;
      }
      normal.diagonal().array() += 1e-10 * trace / static_cast<double>(order + 1);
      llt.compute(normal);
      ridged[f] = 1;
    }
    // H normal = rhs^H  <=>  normal H^H = rhs, since normal is Hermitian.
    const Eigen::VectorXcd hh = llt.solve(rhs);
    for (std::size_t p = 0; p <= order; ++p) {
      out.coeffs(f, p) = std::conj(hh(static_cast<Eigen::Index>(p)));
    }
  });

  if (regularized != nullptr) {
    for (std::size_t f = 0; f < bands; ++f) {
      if (ridged[f]) regularized->push_back(f);
    }
  }
  return out;
}

NoiseVariance m_step_noise(const EmState& state, const PosteriorStats& post,
                           const CtfFilter& ctf_new) {
  const std::size_t bands = state.observed.rows();
  const std::size_t frames = state.observed.cols();
  if (post.bands() != bands || post.frames() != frames || ctf_new.bands() != bands ||
      post.order < ctf_new.order()) {
    throw ShapeError("m_step_noise: posterior or filter does not match state");
  }
  NoiseVariance out;
  out.power.resize(bands);
  parallel_for(bands, resolve_workers(state.config.workers), [&](std::size_t f) {
    const auto terms =
        band_residual(state.observed.row(f), post.mean.row(f), ctf_new.taps(f), post, f);
    out.power[f] =
        std::max(state.noise_floor, (terms.residual + terms.trace) / static_cast<double>(frames));
  });
  return out;
}

double surrogate_objective(const ComplexGrid& observed, const PosteriorStats& post,
                           const CtfFilter& ctf, const NoiseVariance& noise,
                           unsigned workers) {
  const std::size_t bands = observed.rows();
  const auto nf = static_cast<double>(observed.cols());
  std::vector<double> per_band(bands);
  parallel_for(bands, resolve_workers(workers), [&](std::size_t f) {
    const auto terms = band_residual(observed.row(f), post.mean.row(f), ctf.taps(f), post, f);
    const double sigma2 = noise.power[f];
    per_band[f] = -nf * std::log(std::numbers::pi * sigma2) -
                  (terms.residual + terms.trace) / sigma2;
  });
  double total = 0.0;
  for (double v : per_band) total += v;
  return total;
}

EmResult run_em(const Spectrogram& x, const PriorVariance& prior, const EmConfig& cfg) {
  EmResult result;
  EmState& state = result.state;
  state = init_state(x, prior, cfg);

  const auto evidence = [](const PosteriorStats& post) {
    double total = 0.0;
    for (double v : post.log_evidence) total += v;
    return total;
  };
  const auto note_retries = [&state](const PosteriorStats& post, std::size_t iteration) {
    for (std::size_t f : post.retried_bands) {
      state.warnings.push_back("iteration " + std::to_string(iteration) + ": band " +
                               std::to_string(f) + " needed raised floors in the E-step");
    }
  };

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const PosteriorStats post = e_step(state);
    note_retries(post, it);
    if (cfg.likelihood_tracking) state.evidence.push_back(evidence(post));

    std::vector<std::size_t> ridged;
    CtfFilter ctf = m_step_ctf(state, post, &ridged);
    for (std::size_t f : ridged) {
      state.warnings.push_back("iteration " + std::to_string(it) + ": band " +
                               std::to_string(f) + " CTF normal matrix regularised");
    }
    NoiseVariance noise = m_step_noise(state, post, ctf);
    state.ctf = std::move(ctf);
    state.noise = std::move(noise);
    if (cfg.likelihood_tracking) {
      state.history.push_back(
          surrogate_objective(state.observed, post, state.ctf, state.noise, cfg.workers));
    }
  }

  result.posterior = e_step(state);
  note_retries(result.posterior, cfg.iterations);
  if (cfg.likelihood_tracking) state.evidence.push_back(evidence(result.posterior));

  result.estimate = x;
  result.estimate.bins = result.posterior.mean;
  return result;
}

}  // namespace ctfem
