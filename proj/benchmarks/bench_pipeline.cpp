#include "gazesearch/pipeline.hpp"
#include "gazesearch/synth.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace gazesearch;

static void BM_ConvertSample(benchmark::State& state) {
    synth::SyntheticSpec spec;
    spec.images = 64;
    spec.max_findings = 3;
    spec.seed = 1;
    const auto vocab = FindingVocabulary::chexpert();
    const auto data = synth::generate(spec, vocab);
    const pipeline::PipelineConfig cfg;
    std::size_t i = 0;
    for (auto _ : state) {
        auto r = pipeline::convert_sample(data.samples[i++ % data.samples.size()], data.relations, vocab, cfg);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_ConvertSample);

static void BM_RadiusFilter(benchmark::State& state) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 256), d(0.05, 1);
    // Only the first fixation is in the box, so the search walks the whole input.
    std::vector<Fixation> raw = {{128, 128, 0.4}};
    while (static_cast<int>(raw.size()) < state.range(0)) {
        const Fixation f{u(rng), u(rng), d(rng)};
        if (f.x < 120 || f.x > 136 || f.y < 120 || f.y > 136) raw.push_back(f);
    }
    const BoundingBoxSet boxes{{"cardiomegaly"}, {{120, 120, 136, 136}}};
    const pipeline::PipelineConfig cfg;
    for (auto _ : state) {
        auto r = pipeline::radius_filter(raw, boxes, 256, 256, cfg);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_RadiusFilter)->Arg(16)->Arg(256)->Arg(4096);
