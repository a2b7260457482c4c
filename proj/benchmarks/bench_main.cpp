#include <random>

#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "iae/evaluation.hpp"
#include "iae/losses.hpp"
#include "iae/networks.hpp"
#include "iae/trainer.hpp"

using namespace iae;

namespace {

// Width-8 networks at 64x64, the desk training scale.
networks::NetworkOptions desk_networks() {
    trainer::TrainConfig c;
    c.networks.renderer.width = 8;
    c.networks.decomposer.width = 8;
    c.networks.discriminator.width = 8;
    return c.networks;
}

dataset::UnpairedBatch random_batch(int64_t b, int64_t res) {
    dataset::UnpairedBatch batch;
    batch.intrinsics = torch::rand({b, 9, res, res}) * 2 - 1;
    batch.intrinsic_mask = torch::ones({b, 1, res, res});
    batch.real = torch::rand({b, 3, res, res}) * 2 - 1;
    batch.real_mask = torch::ones({b, 1, res, res});
    return batch;
}

void BM_RendererForwardBackward(benchmark::State& state) {
    auto models = networks::make_models(desk_networks(), 0);
    auto x = torch::rand({state.range(0), 9, 64, 64}) * 2 - 1;
    for (auto _ : state) {
        auto y = models.renderer->forward(x);
        y.mean().backward();
        benchmark::DoNotOptimize(y.data_ptr());
    }
}
BENCHMARK(BM_RendererForwardBackward)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_DecomposerForwardBackward(benchmark::State& state) {
    auto models = networks::make_models(desk_networks(), 0);
    auto x = torch::rand({state.range(0), 3, 64, 64}) * 2 - 1;
    for (auto _ : state) {
        auto y = models.decomposer->forward(x);
        y.mean().backward();
        benchmark::DoNotOptimize(y.data_ptr());
    }
}
BENCHMARK(BM_DecomposerForwardBackward)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_DiscriminatorForward(benchmark::State& state) {
    auto models = networks::make_models(desk_networks(), 0);
    auto x = torch::rand({4, 9, 64, 64});
    torch::NoGradGuard no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(networks::discriminate(models.d_intrinsic, x));
}
BENCHMARK(BM_DiscriminatorForward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    trainer::TrainConfig config;
    config.networks = desk_networks();
    config.batch_size = 4;
    trainer::Trainer t(config);
    const auto batch = random_batch(4, 64);
    for (auto _ : state) benchmark::DoNotOptimize(t.train_step(batch));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

Eigen::MatrixXd features(int64_t n, int64_t d, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd m(n, d);
    for (int64_t i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
}

void BM_Fid(benchmark::State& state) {
    const auto a = features(state.range(0), 64, 1), b = features(state.range(0), 64, 2);
    for (auto _ : state) benchmark::DoNotOptimize(evaluation::fid(a, b));
}
BENCHMARK(BM_Fid)->Arg(128)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Kid(benchmark::State& state) {
    const auto a = features(state.range(0), 64, 1), b = features(state.range(0), 64, 2);
    for (auto _ : state) benchmark::DoNotOptimize(evaluation::kid(a, b));
}
BENCHMARK(BM_Kid)->Arg(128)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_RandomFeatures(benchmark::State& state) {
    evaluation::RandomConvExtractor extractor;
    auto images = torch::rand({32, 3, 64, 64}) * 2 - 1;
    for (auto _ : state) benchmark::DoNotOptimize(extractor.features(images));
}
BENCHMARK(BM_RandomFeatures)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
