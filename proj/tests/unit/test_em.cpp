#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ctfem/em.hpp"
#include "ctfem/errors.hpp"
#include "dense_oracle.hpp"
#include "synthetic.hpp"

using namespace ctfem;
using ctfem::testing::complex_normal;

namespace {

Spectrogram spec_of(ComplexGrid bins) {
  Spectrogram s;
  s.bins = std::move(bins);
  s.window_len = 2 * s.bins.rows();
  s.hop = 1;
  return s;
}

// A state holding arbitrary parameters, bypassing the initial heuristics.
EmState random_state(std::size_t bands, std::size_t frames, std::size_t order, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 3.0);
  ComplexGrid x(bands, frames);
  for (auto& v : x.values()) v = complex_normal(rng, u(rng));
  PriorVariance prior{RealGrid(bands, frames)};
  for (auto& v : prior.var.values()) v = u(rng);
  EmConfig cfg;
  cfg.ctf_order = order;
  EmState st = init_state(spec_of(x), prior, cfg);
  for (std::size_t f = 0; f < bands; ++f) {
    for (std::size_t p = 0; p <= order; ++p) st.ctf.coeffs(f, p) = complex_normal(rng, p == 0 ? 1.0 : 0.3);
    st.noise.power[f] = u(rng);
  }
  return st;
}

double rel(Complex a, Complex b, double scale) { return std::abs(a - b) / std::max(scale, 1e-300); }

// Posterior mean and covariance of band f as dense Eigen objects (the
// covariance band only, zero elsewhere: enough for the M-step oracles).
Eigen::MatrixXcd banded_cov(const PosteriorStats& post, std::size_t f) {
  const auto n = static_cast<Eigen::Index>(post.frames());
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t i = 0; i < post.frames(); ++i) {
    for (std::size_t j = 0; j < post.frames(); ++j) {
      const std::size_t gap = i > j ? i - j : j - i;
      if (gap <= post.order) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = post.covariance(f, i, j);
    }
  }
  return c;
}

}  // namespace

TEST(InitState, DefaultInitialisation) {
  ComplexGrid x(3, 8);
  for (std::size_t n = 0; n < 8; ++n) {
    x(0, n) = std::polar(1.0, 0.3 * static_cast<double>(n));
    x(1, n) = Complex(0.0, 2.0);
  }
  EmConfig cfg;
  cfg.ctf_order = 3;
  const auto st = init_state(spec_of(x), constant_prior(3, 8, 1.0), cfg);
  EXPECT_NEAR(st.noise.power[0], 1000.0, 1e-9);
  EXPECT_NEAR(st.noise.power[1], 4000.0, 1e-9);
  EXPECT_EQ(st.noise.power[2], st.noise_floor);
  EXPECT_GT(st.noise_floor, 0.0);
  for (std::size_t f = 0; f < 3; ++f) {
    EXPECT_EQ(st.ctf.coeffs(f, 0), Complex(1.0, 0.0));
    for (std::size_t p = 1; p <= 3; ++p) EXPECT_EQ(st.ctf.coeffs(f, p), Complex{});
  }
  EXPECT_TRUE(st.history.empty());
}

TEST(InitState, Errors) {
  EmConfig cfg;
  cfg.ctf_order = 8;
  EXPECT_THROW(init_state(spec_of(ComplexGrid(2, 8)), constant_prior(2, 8, 1.0), cfg), InvalidInput);
  cfg.ctf_order = 2;
  EXPECT_THROW(init_state(spec_of(ComplexGrid(2, 8)), constant_prior(2, 7, 1.0), cfg), ShapeError);
  cfg.iterations = 0;
  EXPECT_THROW(init_state(spec_of(ComplexGrid(2, 8)), constant_prior(2, 8, 1.0), cfg), InvalidInput);
}

TEST(EStep, ScalarWiener) {
  EmConfig cfg;
  cfg.ctf_order = 0;
  auto st = init_state(spec_of(ComplexGrid(2, 5, Complex(2.0, 0.0))), constant_prior(2, 5, 1.0), cfg);
  st.noise.power = {1.0, 1.0};
  const auto post = e_step(st);
  for (std::size_t f = 0; f < 2; ++f) {
    for (std::size_t n = 0; n < 5; ++n) {
      EXPECT_NEAR(std::abs(post.mean(f, n) - Complex(1.0, 0.0)), 0.0, 1e-14);
      EXPECT_NEAR(post.cov_band(f, 0, n).real(), 0.5, 1e-14);
    }
  }
}

TEST(EStep, HugeNoiseFallsBackToPrior) {
  std::mt19937_64 rng(1);
  auto st = random_state(2, 10, 2, rng);
  st.noise.power = {1e12, 1e12};
  const auto post = e_step(st);
  for (std::size_t f = 0; f < 2; ++f) {
    for (std::size_t n = 0; n < 10; ++n) {
      EXPECT_LT(std::abs(post.mean(f, n)), 1e-5);
      EXPECT_NEAR(post.cov_band(f, 0, n).real(), st.prior.var(f, n), 1e-9 * st.prior.var(f, n));
    }
  }
}

TEST(EStep, MatchesDenseOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t bands = 2, frames = 8, order = 2;
    const auto st = random_state(bands, frames, order, rng);
    const auto post = e_step(st);
    for (std::size_t f = 0; f < bands; ++f) {
      const auto dense = oracle::posterior(st.observed.row(f), st.ctf.taps(f), st.noise.power[f],
                                           st.prior.var.row(f));
      const double mscale = dense.mean.norm();
      const double cscale = dense.cov.norm();
      for (std::size_t n = 0; n < frames; ++n) {
        EXPECT_LT(rel(post.mean(f, n), dense.mean(static_cast<Eigen::Index>(n)), mscale), 1e-8);
        for (std::size_t d = 0; d <= order && d <= n; ++d) {
          const Complex want = dense.cov(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n - d));
          EXPECT_LT(rel(post.cov_band(f, d, n), want, cscale), 1e-8);
        }
      }
      EXPECT_NEAR(post.log_evidence[f], dense.log_evidence, 1e-9 * std::abs(dense.log_evidence));
    }
  }
}

TEST(EStep, PosteriorVarianceBoundedByPrior) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto st = random_state(3, 14, 4, rng);
    const auto post = e_step(st);
    for (std::size_t f = 0; f < 3; ++f) {
      for (std::size_t n = 0; n < 14; ++n) {
        const Complex d = post.cov_band(f, 0, n);
        EXPECT_EQ(d.imag(), 0.0);
        EXPECT_GT(d.real(), 0.0);
        EXPECT_LE(d.real(), st.prior.var(f, n) * (1.0 + 1e-12));
      }
    }
  }
}

TEST(EStep, CovarianceLookupIsHermitian) {
  std::mt19937_64 rng(4);
  const auto st = random_state(1, 9, 3, rng);
  const auto post = e_step(st);
  for (std::size_t n = 0; n < 9; ++n) {
    for (std::size_t m = n >= 3 ? n - 3 : 0; m <= n; ++m) {
      EXPECT_EQ(post.covariance(0, m, n), std::conj(post.covariance(0, n, m)));
    }
  }
  EXPECT_THROW(post.covariance(0, 8, 0), ShapeError);
}

TEST(EStep, NonFinitePriorReportsBand) {
  std::mt19937_64 rng(5);
  auto st = random_state(4, 10, 2, rng);
  st.prior.var(2, 5) = std::nan("");
  try {
    e_step(st);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.band(), 2u);
  }
}

TEST(EStep, WorkerCountDoesNotChangeBits) {
  std::mt19937_64 rng(6);
  auto st = random_state(7, 30, 4, rng);
  st.config.workers = 1;
  const auto a = e_step(st);
  st.config.workers = 3;
  const auto b = e_step(st);
  st.config.workers = 16;
  const auto c = e_step(st);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.cov, b.cov);
  EXPECT_EQ(a.mean, c.mean);
  EXPECT_EQ(a.log_evidence, c.log_evidence);
}

TEST(MStepCtf, NoiselessRecovery) {
  std::mt19937_64 rng(7);
  const std::size_t frames = 40, order = 3;
  ComplexGrid mu(2, frames);
  for (auto& v : mu.values()) v = complex_normal(rng, 1.0);
  CtfFilter truth{ComplexGrid(2, order + 1)};
  for (auto& v : truth.coeffs.values()) v = complex_normal(rng, 1.0);

  EmConfig cfg;
  cfg.ctf_order = order;
  auto st = init_state(spec_of(apply_ctf(truth, mu)), constant_prior(2, frames, 1.0), cfg);
  PosteriorStats post(2, frames, order);
  post.mean = mu;
  const auto est = m_step_ctf(st, post);
  for (std::size_t i = 0; i < truth.coeffs.size(); ++i) {
    EXPECT_NEAR(std::abs(est.coeffs.values()[i] - truth.coeffs.values()[i]), 0.0, 1e-8);
  }
}

TEST(MStepCtf, ScalarLeastSquares) {
  std::mt19937_64 rng(8);
  const std::size_t frames = 12;
  ComplexGrid mu(1, frames), x(1, frames);
  for (auto& v : mu.values()) v = complex_normal(rng, 1.0);
  for (auto& v : x.values()) v = complex_normal(rng, 1.0);
  EmConfig cfg;
  cfg.ctf_order = 0;
  auto st = init_state(spec_of(x), constant_prior(1, frames, 1.0), cfg);
  PosteriorStats post(1, frames, 0);
  post.mean = mu;
  Complex num{};
  double den = 0.0;
  for (std::size_t n = 0; n < frames; ++n) {
    num += x(0, n) * std::conj(mu(0, n));
    den += std::norm(mu(0, n));
  }
  EXPECT_NEAR(std::abs(m_step_ctf(st, post).coeffs(0, 0) - num / den), 0.0, 1e-13);
}

TEST(MStepCtf, MatchesDenseNormalEquations) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t frames = 8, order = 2;
    const auto st = random_state(2, frames, order, rng);
    const auto post = e_step(st);
    const auto est = m_step_ctf(st, post);
    for (std::size_t f = 0; f < 2; ++f) {
      const Eigen::VectorXcd mu = oracle::to_vec(post.mean.row(f));
      const auto want = oracle::ctf_normal_equations(st.observed.row(f), mu, banded_cov(post, f), order);
      double scale = 0.0;
      for (Complex v : want) scale = std::max(scale, std::abs(v));
      for (std::size_t p = 0; p <= order; ++p) {
        EXPECT_LT(rel(est.coeffs(f, p), want[p], scale), 1e-10) << "trial " << trial;
      }
    }
  }
}

TEST(MStepCtf, SingularNormalMatrixIsRegularised) {
  EmConfig cfg;
  cfg.ctf_order = 2;
  ComplexGrid x(2, 6, Complex(1.0, 0.0));
  auto st = init_state(spec_of(x), constant_prior(2, 6, 1.0), cfg);
  PosteriorStats post(2, 6, 2);
  post.mean(0, 5) = 1.0;  // band 0: only one nonzero frame, rank one
  std::vector<std::size_t> ridged;
  const auto est = m_step_ctf(st, post, &ridged);
  EXPECT_EQ(ridged, (std::vector<std::size_t>{0, 1}));
  for (Complex v : est.coeffs.values()) EXPECT_TRUE(std::isfinite(std::abs(v)));
  // Band 1 has nothing to fit against and keeps its filter.
  EXPECT_EQ(est.coeffs(1, 0), Complex(1.0, 0.0));
}

TEST(MStepNoise, ZeroResidualClampsToFloor) {
  std::mt19937_64 rng(10);
  ComplexGrid mu(1, 10);
  for (auto& v : mu.values()) v = complex_normal(rng, 1.0);
  CtfFilter h{ComplexGrid(1, 3)};
  for (auto& v : h.coeffs.values()) v = complex_normal(rng, 1.0);
  EmConfig cfg;
  cfg.ctf_order = 2;
  auto st = init_state(spec_of(apply_ctf(h, mu)), constant_prior(1, 10, 1.0), cfg);
  PosteriorStats post(1, 10, 2);
  post.mean = mu;
  EXPECT_EQ(m_step_noise(st, post, h).power[0], st.noise_floor);
}

TEST(MStepNoise, TraceOfIdentityFilter) {
  std::mt19937_64 rng(11);
  ComplexGrid mu(1, 10);
  for (auto& v : mu.values()) v = complex_normal(rng, 1.0);
  EmConfig cfg;
  cfg.ctf_order = 0;
  auto st = init_state(spec_of(mu), constant_prior(1, 10, 1.0), cfg);
  PosteriorStats post(1, 10, 0);
  post.mean = mu;
  for (std::size_t n = 0; n < 10; ++n) post.cov_band(0, 0, n) = 0.37;
  EXPECT_NEAR(m_step_noise(st, post, CtfFilter::identity(1, 0)).power[0], 0.37, 1e-15);
}

TEST(MStepNoise, MatchesDenseFormula) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 25; ++trial) {
    const auto st = random_state(2, 9, 3, rng);
    const auto post = e_step(st);
    const auto ctf = m_step_ctf(st, post);
    const auto noise = m_step_noise(st, post, ctf);
    for (std::size_t f = 0; f < 2; ++f) {
      const double want = oracle::noise_update(st.observed.row(f), oracle::to_vec(post.mean.row(f)),
                                               banded_cov(post, f), ctf.taps(f));
      EXPECT_NEAR(noise.power[f], want, 1e-10 * want);
    }
  }
}

TEST(MStep, EachUpdateRaisesSurrogate) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto st = random_state(3, 16, 3, rng);
    const auto post = e_step(st);
    const double before = surrogate_objective(st.observed, post, st.ctf, st.noise);
    const auto ctf = m_step_ctf(st, post);
    const double mid = surrogate_objective(st.observed, post, ctf, st.noise);
    const auto noise = m_step_noise(st, post, ctf);
    const double after = surrogate_objective(st.observed, post, ctf, noise);
    EXPECT_GE(mid, before - 1e-9 * std::abs(before));
    EXPECT_GE(after, mid - 1e-9 * std::abs(mid));
  }
}

TEST(RunEm, IdentitySanity) {
  std::mt19937_64 rng(14);
  ComplexGrid x(4, 32);
  for (auto& v : x.values()) v = complex_normal(rng, 1.0);
  PriorVariance prior{RealGrid(4, 32)};
  for (std::size_t i = 0; i < x.size(); ++i) prior.var.values()[i] = std::norm(x.values()[i]);
  EmConfig cfg;
  cfg.ctf_order = 0;
  cfg.iterations = 10;
  // Start near the noiseless optimum: from the default 1e3 start the noise
  // power only decays sublinearly towards zero (see acceptance suite).
  cfg.noise_init_scale = 1e-6;
  const auto result = run_em(spec_of(x), prior, cfg);
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    err += std::norm(result.estimate.bins.values()[i] - x.values()[i]);
    ref += std::norm(x.values()[i]);
  }
  EXPECT_LT(std::sqrt(err / ref), 1e-3);
  EXPECT_EQ(result.state.history.size(), 10u);
  EXPECT_EQ(result.state.evidence.size(), 11u);
}

TEST(RunEm, EvidenceNeverDecreases) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 5; ++trial) {
    const auto truth = ctfem::testing::geometric_ctf(3, 3, 0.5, rng);
    const auto inst = ctfem::testing::make_instance(3, 60, truth, 20.0, rng);
    EmConfig cfg;
    cfg.ctf_order = 3;
    cfg.iterations = 30;
    const auto result = run_em(inst.observed, inst.prior, cfg);
    const auto& ev = result.state.evidence;
    for (std::size_t i = 1; i < ev.size(); ++i) {
      EXPECT_GE(ev[i], ev[i - 1] - 1e-9 * std::abs(ev[i - 1])) << "step " << i;
    }
  }
}

TEST(RunEm, ReproducibleAcrossWorkerCounts) {
  std::mt19937_64 rng(16);
  const auto truth = ctfem::testing::geometric_ctf(6, 2, 0.5, rng);
  const auto inst = ctfem::testing::make_instance(6, 40, truth, 25.0, rng);
  EmConfig cfg;
  cfg.ctf_order = 2;
  cfg.iterations = 5;
  cfg.workers = 1;
  const auto a = run_em(inst.observed, inst.prior, cfg);
  cfg.workers = 4;
  const auto b = run_em(inst.observed, inst.prior, cfg);
  EXPECT_EQ(a.estimate.bins, b.estimate.bins);
  EXPECT_EQ(a.state.ctf.coeffs, b.state.ctf.coeffs);
  EXPECT_EQ(a.state.history, b.state.history);
}
