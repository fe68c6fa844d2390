#include <benchmark/benchmark.h>

#include "feedmesh/frame.hpp"
#include "feedmesh/generator.hpp"

using namespace feedmesh;

namespace {

std::vector<dataflow::Record> sample_records(size_t n) {
    adaptors::TweetFactory factory("bench", 1);
    std::vector<dataflow::Record> out;
    for (size_t i = 0; i < n; ++i) {
        auto line = factory.next_line();
        out.push_back(dataflow::Record::parse(line));
    }
    return out;
}

}  // namespace

static void BM_FrameEncode(benchmark::State& state) {
    dataflow::Frame frame(sample_records(static_cast<size_t>(state.range(0))), 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(frame.encode());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FrameEncode)->Arg(16)->Arg(128);

static void BM_FrameDecode(benchmark::State& state) {
    dataflow::Frame frame(sample_records(static_cast<size_t>(state.range(0))), 0);
    std::string bytes = frame.encode();
    for (auto _ : state) {
        benchmark::DoNotOptimize(dataflow::Frame::decode(bytes));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FrameDecode)->Arg(16)->Arg(128);

static void BM_FrameBuilder(benchmark::State& state) {
    auto records = sample_records(256);
    for (auto _ : state) {
        dataflow::FrameBuilder builder;
        size_t frames = 0;
        for (const auto& r : records) frames += builder.add(r).size();
        frames += builder.flush().size();
        benchmark::DoNotOptimize(frames);
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_FrameBuilder);
