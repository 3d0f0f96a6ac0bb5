#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "mipkd/backbones.hpp"
#include "mipkd/data.hpp"
#include "mipkd/metrics.hpp"
#include "mipkd/mixer.hpp"

using namespace mipkd;

static void BM_StudentForward(benchmark::State& state) {
    torch::NoGradGuard ng;
    NetworkSpec spec{Arch::EDSR, 8, 8, 1, 2, 1.0, 16};
    auto model = build_model(spec, 1);
    model->eval();
    auto x = torch::rand({8, 3, 24, 24});
    for (auto _ : state) benchmark::DoNotOptimize(model->forward(x));
}
BENCHMARK(BM_StudentForward);

static void BM_BicubicDownscale(benchmark::State& state) {
    auto img = torch::rand({3, 96, 96});
    for (auto _ : state) benchmark::DoNotOptimize(bicubic_resize(img, 48, 48));
}
BENCHMARK(BM_BicubicDownscale);

static void BM_RandomMask(benchmark::State& state) {
    MixerConfig cfg;
    for (auto _ : state)
        benchmark::DoNotOptimize(generate_mask(cfg, 8, {16, 24, 24}, std::nullopt, 42));
}
BENCHMARK(BM_RandomMask);

static void BM_Ssim(benchmark::State& state) {
    auto a = torch::rand({1, 96, 96});
    auto b = torch::rand({1, 96, 96});
    for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim);

BENCHMARK_MAIN();
