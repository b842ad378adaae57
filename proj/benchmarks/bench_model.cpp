#include "gazesearch/train.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace gazesearch;
using namespace gazesearch::model;

namespace {

ModelConfig desk() {
    ModelConfig c;  // 64 px input, D = 64
    c.seed = 1;
    return c;
}

std::vector<TrainExample> batch(int n) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1), pos(0, 64), d(0.1, 0.8);
    std::vector<TrainExample> out;
    for (int i = 0; i < n; ++i) {
        TrainExample ex;
        ex.image = Matrix(64, 64);
        for (Eigen::Index k = 0; k < ex.image.size(); ++k) ex.image.data()[k] = u(rng);
        ex.finding = i % 13;
        ex.fixations = {{32, 32, 0.3}, {pos(rng), pos(rng), d(rng)}, {pos(rng), pos(rng), d(rng)},
                        {pos(rng), pos(rng), d(rng)}};
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace

static void BM_TrainStep(benchmark::State& state) {
    ChestSearch net(desk());
    AdamW opt(1e-3, 0.01);
    std::mt19937_64 rng(0);
    const auto b = batch(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(train_step(net, opt, b, rng));
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_Predict(benchmark::State& state) {
    const ChestSearch net(desk());
    const auto b = batch(1);
    std::uint64_t seed = 0;
    for (auto _ : state) {
        auto s = predict_scanpath(net, b[0].image, 2, "i", {"edema"}, 224, 224, seed++, DecodeMode::Sample);
        benchmark::DoNotOptimize(s);
    }
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMillisecond);
