// SPDX-License-Identifier: Apache-2.0
// Serial reference vs OpenMP kernels.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "papernet/dsp.hpp"
#include "papernet/kernels.hpp"
#include "papernet/model.hpp"

namespace {

using namespace papernet;

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d;
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <kernels::Backend B>
void BM_Gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = random_vec(m * k, 1), b = random_vec(k * n, 2);
  std::vector<float> c(m * n);
  for (auto _ : state) {
    if constexpr (B == kernels::Backend::serial)
      kernels::serial::gemm<float>(a, b, c, m, k, n, false);
    else
      kernels::parallel::gemm<float>(a, b, c, m, k, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * m * k * n));
}

// im2col shapes of the three convolutions at batch 64, plus the LSTM step.
#define GEMM_SHAPES Args({1024, 5, 32})->Args({1024, 160, 64})->Args({512, 192, 128})->Args({64, 192, 256})
BENCHMARK(BM_Gemm<kernels::Backend::serial>)->GEMM_SHAPES;
BENCHMARK(BM_Gemm<kernels::Backend::parallel>)->GEMM_SHAPES;

void BM_FilterChannels(benchmark::State& state) {
  const bool parallel = state.range(0) != 0;
  const auto filter = dsp::butter_bandpass(4, 0.5, 45.0, 256.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  dsp::Channels ch(16, std::vector<double>(8000));
  for (auto& c : ch)
    for (auto& x : c) x = d(rng);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::filter_channels(filter, ch, parallel));
}
BENCHMARK(BM_FilterChannels)->Arg(0)->Arg(1);

template <kernels::Backend B>
void BM_ModelForward(benchmark::State& state) {
  kernels::ScopedBackend scoped(B);
  Model<float> model(Variant::full, 4, 16, 0);
  const auto batch = static_cast<std::size_t>(state.range(0));
  Tensor<float> x({batch, 16, 1}, random_vec(batch * 16, 4));
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, Mode::infer).data().data());
}
BENCHMARK(BM_ModelForward<kernels::Backend::serial>)->Arg(1)->Arg(64);
BENCHMARK(BM_ModelForward<kernels::Backend::parallel>)->Arg(1)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
