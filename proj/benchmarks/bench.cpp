#include <benchmark/benchmark.h>

#include "stochff/data.hpp"
#include "stochff/gauss.hpp"
#include "stochff/mc.hpp"
#include "stochff/model.hpp"

using namespace stochff;

static void BM_CensoredReluMoments(benchmark::State& state) {
    const RegularizationConstants reg;
    double mu = -2.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(censored_relu_moments(mu, 1.3, 0.0, reg));
        mu += 1e-6;
    }
}
BENCHMARK(BM_CensoredReluMoments);

static void BM_PairwiseMaxMoments(benchmark::State& state) {
    const RegularizationConstants reg;
    double mu = -2.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            pairwise_max_moments({mu, 1.0}, {0.5, 2.0}, reg));
        mu += 1e-6;
    }
}
BENCHMARK(BM_PairwiseMaxMoments);

static void BM_PhiloxNormal(benchmark::State& state) {
    std::uint64_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(standard_normal_at(1, i++));
}
BENCHMARK(BM_PhiloxNormal);

static void BM_ForwardDet(benchmark::State& state) {
    const SyntheticDataset ds = generate_dataset(8, 1);
    const Model m = fixture_architecture(ds, 2);
    for (auto _ : state)
        benchmark::DoNotOptimize(forward_det(m, ds.data.images[0]));
}
BENCHMARK(BM_ForwardDet);

static void BM_ForwardStochastic(benchmark::State& state) {
    const SyntheticDataset ds = generate_dataset(8, 1);
    const Model m = fixture_architecture(ds, 2);
    for (auto _ : state)
        benchmark::DoNotOptimize(forward_stochastic(m, ds.data.images[0], 0.1));
}
BENCHMARK(BM_ForwardStochastic);

BENCHMARK_MAIN();
