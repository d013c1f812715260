#include <benchmark/benchmark.h>

#include "mncastle/castle.hpp"
#include "mncastle/mndag.hpp"
#include "mncastle/spectrum.hpp"
#include "mncastle/synth.hpp"
#include "mncastle/tensor.hpp"
#include "mncastle/wavelet.hpp"

namespace {

using namespace mncastle;

Tensor spd(std::size_t n, Rng& rng) {
  Tensor b(Shape{n, n});
  for (double& v : b.values()) v = rng.normal();
  Tensor a = matmul(b, transpose_last2(b));
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] += static_cast<double>(n);
  return a;
}

void BM_Cholesky(benchmark::State& state) {
  Rng rng(1, "bench");
  const Tensor a = spd(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(cholesky(a));
}
BENCHMARK(BM_Cholesky)->RangeMultiplier(2)->Range(8, 128);

void BM_NilpotentInverse(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(2, "bench");
  Tensor c(Shape{n, n});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < r; ++k) c[r * n + k] = rng.normal(0.0, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(nilpotent_inverse(c));
}
BENCHMARK(BM_NilpotentInverse)->DenseRange(2, 8, 3);

void BM_Ndwt(benchmark::State& state) {
  const std::size_t t = static_cast<std::size_t>(state.range(0));
  Rng rng(3, "bench");
  Tensor x(Shape{5, t});
  for (double& v : x.values()) v = rng.normal();
  const auto sys = wavelet::build_system("d8", static_cast<int>(wavelet::floor_log2(t)));
  for (auto _ : state) benchmark::DoNotOptimize(wavelet::ndwt(x, sys));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(t));
}
BENCHMARK(BM_Ndwt)->RangeMultiplier(4)->Range(64, 4096);

void BM_SpectrumEstimate(benchmark::State& state) {
  const std::size_t t = static_cast<std::size_t>(state.range(0));
  Rng rng(4, "bench");
  Tensor x(Shape{3, t});
  for (double& v : x.values()) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(spectrum::estimate(x, {}));
}
BENCHMARK(BM_SpectrumEstimate)->Arg(256)->Arg(1024);

struct StepFixture {
  Tensor x;
  Tensor s_hat;
  castle::InferConfig config;
  castle::VariationalState state;
  StepFixture() {
    mndag::GenConfig g;
    g.nodes = 5;
    g.samples = 128;
    g.mu = 0.5;
    g.tau = 0.5;
    Rng rng(5, "bench");
    const auto dag = mndag::sample_mndag(g, rng);
    s_hat = mndag::ground_truth_spectrum(dag.mixing);
    x = synth::generate(dag.mixing, wavelet::build_system("haar", dag.scales), rng);
    state = castle::init_state(g.nodes, static_cast<std::size_t>(dag.scales), g.samples, config, false);
  }
};

void BM_Svi1Step(benchmark::State& state) {
  StepFixture f;
  Rng rng(6, "bench");
  for (auto _ : state) benchmark::DoNotOptimize(castle::svi1_step(f.x, f.state, f.config, rng));
}
BENCHMARK(BM_Svi1Step)->Unit(benchmark::kMillisecond);

void BM_Svi2Step(benchmark::State& state) {
  StepFixture f;
  Rng rng(7, "bench");
  const auto order = stochastic::CausalOrdering::identity(5);
  for (auto _ : state) benchmark::DoNotOptimize(castle::svi2_step(f.s_hat, order, f.state, f.config, rng));
}
BENCHMARK(BM_Svi2Step)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
