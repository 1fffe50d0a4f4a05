#include <benchmark/benchmark.h>

#include <random>

#include "ctfem/em.hpp"

using namespace ctfem;

namespace {

EmState make_state(std::size_t bands, std::size_t frames, std::size_t order) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  Spectrogram spec;
  spec.bins = ComplexGrid(bands, frames);
  spec.window_len = 2 * bands;
  spec.hop = 1;
  for (auto& v : spec.bins.values()) v = {g(rng), g(rng)};
  PriorVariance prior{RealGrid(bands, frames)};
  for (auto& v : prior.var.values()) v = 1.0 + g(rng) * g(rng);
  EmConfig cfg;
  cfg.ctf_order = order;
  EmState st = init_state(spec, prior, cfg);
  for (std::size_t f = 0; f < bands; ++f) {
    for (std::size_t p = 1; p <= order; ++p) st.ctf.coeffs(f, p) = {0.3 * g(rng), 0.3 * g(rng)};
  }
  return st;
}

void BM_EStepFrames(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  const EmState st = make_state(4, frames, 16);
  for (auto _ : state) benchmark::DoNotOptimize(e_step(st));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EStepFrames)->RangeMultiplier(2)->Range(256, 8192)->Complexity(benchmark::oN);

void BM_EStepOrder(benchmark::State& state) {
  const auto order = static_cast<std::size_t>(state.range(0));
  const EmState st = make_state(4, 2048, order);
  for (auto _ : state) benchmark::DoNotOptimize(e_step(st));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EStepOrder)->RangeMultiplier(2)->Range(4, 64)->Complexity(benchmark::oNSquared);

void BM_EmIteration(benchmark::State& state) {
  EmState st = make_state(64, 320, 30);
  for (auto _ : state) {
    const PosteriorStats post = e_step(st);
    st.ctf = m_step_ctf(st, post);
    st.noise = m_step_noise(st, post, st.ctf);
  }
}
BENCHMARK(BM_EmIteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
