#include <benchmark/benchmark.h>

#include "feedmesh/generator.hpp"

using namespace feedmesh;

static void BM_TweetSynthesis(benchmark::State& state) {
    adaptors::TweetFactory factory("bench", 42);
    for (auto _ : state) {
        benchmark::DoNotOptimize(factory.next_line());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TweetSynthesis);

static void BM_GeneratorStep(benchmark::State& state) {
    adaptors::SimGenerator gen("bench", 20000, 1e9, 42);
    Tick t = 0;
    for (auto _ : state) {
        gen.step(t++);
        benchmark::DoNotOptimize(gen.read(true));
    }
    state.SetItemsProcessed(state.iterations() * 200);  // 20k/s at 100 ticks/s
}
BENCHMARK(BM_GeneratorStep);
