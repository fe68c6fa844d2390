#include <benchmark/benchmark.h>

#include "feedmesh/generator.hpp"
#include "feedmesh/metafeed.hpp"
#include "feedmesh/udf.hpp"

using namespace feedmesh;

namespace {

struct NullSink : dataflow::SoftFailureSink {
    void log_soft_failure(Tick, const std::string&, dataflow::Role, const NodeId&, const std::string&,
                          const dataflow::Record&) override {}
};

dataflow::Frame sample_frame(size_t n) {
    adaptors::TweetFactory factory("bench", 7);
    std::vector<dataflow::Record> records;
    for (size_t i = 0; i < n; ++i) records.push_back(dataflow::Record::parse(factory.next_line()));
    return dataflow::Frame(std::move(records), 0);
}

}  // namespace

static void BM_MetaComputeAddHashTags(benchmark::State& state) {
    NullSink sink;
    auto registry = udf::FunctionRegistry::with_builtins();
    auto frame = sample_frame(static_cast<size_t>(state.range(0)));
    auto policy = catalog::fault_tolerant_policy();
    dataflow::MetaFeedOperator meta(
        "bench#compute#0", "F", dataflow::Role::Compute, "A",
        std::make_unique<dataflow::ComputeCore>(std::vector<udf::Function>{registry.make("addHashTags")}),
        &sink);
    for (auto _ : state) {
        benchmark::DoNotOptimize(meta.process_frame(frame, policy, 0));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MetaComputeAddHashTags)->Arg(32)->Arg(128);
