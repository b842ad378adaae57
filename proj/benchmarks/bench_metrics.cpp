#include "gazesearch/metrics.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace gazesearch;

namespace {

std::vector<Fixation> path(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(0, 224), d(0.05, 1);
    std::vector<Fixation> out;
    for (int i = 0; i < n; ++i) out.push_back({u(rng), u(rng), d(rng)});
    return out;
}

}  // namespace

static void BM_ScanMatch(benchmark::State& state) {
    std::mt19937_64 rng(1);
    const Scanpath a{"i", {"f"}, path(rng, 7), 224, 224}, b{"i", {"f"}, path(rng, 7), 224, 224};
    const metrics::ScanMatchConfig cfg;
    const bool dur = state.range(0) != 0;
    for (auto _ : state) benchmark::DoNotOptimize(metrics::scanmatch(a, b, cfg, dur, 224, 224));
}
BENCHMARK(BM_ScanMatch)->Arg(0)->Arg(1);

static void BM_MultiMatch(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const auto a = path(rng, 7), b = path(rng, 7);
    for (auto _ : state) benchmark::DoNotOptimize(metrics::multimatch(a, b, 224, 224));
}
BENCHMARK(BM_MultiMatch);

static void BM_SedStde(benchmark::State& state) {
    std::mt19937_64 rng(3);
    const auto a = path(rng, 7), b = path(rng, 7);
    const metrics::GridSpec g{5, 5, 224, 224};
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::sed(a, b, g));
        benchmark::DoNotOptimize(metrics::stde(a, b, 3, 224, 224));
    }
}
BENCHMARK(BM_SedStde);

static void BM_Evaluate(benchmark::State& state) {
    std::mt19937_64 rng(4);
    std::vector<Scanpath> pred, ref;
    for (int i = 0; i < state.range(0); ++i) {
        const std::string id = "img" + std::to_string(i);
        pred.push_back({id, {"edema"}, path(rng, 5), 224, 224});
        ref.push_back({id, {"edema"}, path(rng, 6), 224, 224});
    }
    const metrics::MetricParams params;
    for (auto _ : state) benchmark::DoNotOptimize(metrics::evaluate(pred, ref, params));
}
BENCHMARK(BM_Evaluate)->Arg(100);
