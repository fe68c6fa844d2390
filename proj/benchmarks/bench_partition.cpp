#include <benchmark/benchmark.h>

#include "feedmesh/metafeed.hpp"

using namespace feedmesh;

static void BM_HashPartitionKey(benchmark::State& state) {
    std::vector<std::string> keys;
    for (int i = 0; i < 4096; ++i) keys.push_back("g0-" + std::to_string(i));
    size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(dataflow::hash_partition_key(keys[i++ & 4095], 8));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_HashPartitionKey);

static void BM_HashPartitionRecord(benchmark::State& state) {
    dataflow::Record r;
    r.set("tweetId", "g0-00001234");
    for (auto _ : state) {
        benchmark::DoNotOptimize(dataflow::hash_partition(r, "tweetId", 8));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_HashPartitionRecord);
