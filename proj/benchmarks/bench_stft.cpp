#include <benchmark/benchmark.h>

#include <random>

#include "ctfem/stft.hpp"

using namespace ctfem;

namespace {

Waveform noise(std::size_t length) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  Waveform w;
  w.samples.resize(length);
  for (double& v : w.samples) v = g(rng);
  return w;
}

void BM_Analyze(benchmark::State& state) {
  const Waveform w = noise(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(analyze(w, 1024, 256));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Analyze)->Arg(16000)->Arg(160000);

void BM_Synthesize(benchmark::State& state) {
  const Spectrogram spec = analyze(noise(static_cast<std::size_t>(state.range(0))), 1024, 256);
  for (auto _ : state) benchmark::DoNotOptimize(synthesize(spec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Synthesize)->Arg(16000)->Arg(160000);

}  // namespace

BENCHMARK_MAIN();
