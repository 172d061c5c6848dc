// Optimized kernels against the serial reference versions.

#include <benchmark/benchmark.h>

#include <random>

#include "tcnn/kernels.hpp"
#include "tcnn/reference.hpp"

namespace {

using namespace tcnn;

Tensor4 random_tensor(Shape4 s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  Tensor4 t(s);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

KernelSet random_kernels(int out, int in, std::uint64_t seed) {
  KernelSet k;
  k.out_channels = out;
  k.in_channels = in;
  k.size = {3, 3, 3};
  k.weights.resize(static_cast<std::size_t>(out) * in * 27);
  k.bias.resize(static_cast<std::size_t>(out));
  std::mt19937_64 rng(seed);
  init_kernels(k, rng);
  return k;
}

// args: in channels, out channels, depth, height, width
void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({8, 16, 8, 40, 56})->Args({32, 32, 4, 20, 28})->Unit(benchmark::kMillisecond);
}

Shape4 shape_of(const benchmark::State& st) {
  return {static_cast<int>(st.range(0)), static_cast<int>(st.range(2)),
          static_cast<int>(st.range(3)), static_cast<int>(st.range(4))};
}

void BM_Conv3d(benchmark::State& st) {
  const Tensor4 x = random_tensor(shape_of(st), 1);
  const KernelSet k = random_kernels(static_cast<int>(st.range(1)), x.channels(), 2);
  for (auto _ : st) benchmark::DoNotOptimize(conv3d(x, k));
}
BENCHMARK(BM_Conv3d)->Apply(conv_args);

void BM_Conv3dReference(benchmark::State& st) {
  const Tensor4 x = random_tensor(shape_of(st), 1);
  const KernelSet k = random_kernels(static_cast<int>(st.range(1)), x.channels(), 2);
  for (auto _ : st) benchmark::DoNotOptimize(reference::conv3d(x, k));
}
BENCHMARK(BM_Conv3dReference)->Apply(conv_args);

void BM_Conv3dBackward(benchmark::State& st) {
  const Tensor4 x = random_tensor(shape_of(st), 1);
  const KernelSet k = random_kernels(static_cast<int>(st.range(1)), x.channels(), 2);
  const Tensor4 g = random_tensor(conv3d_output_shape(x.shape(), k.out_channels, k.size, {}), 3);
  for (auto _ : st) benchmark::DoNotOptimize(conv3d_backward(x, k, g));
}
BENCHMARK(BM_Conv3dBackward)->Apply(conv_args);

void BM_Conv3dBackwardReference(benchmark::State& st) {
  const Tensor4 x = random_tensor(shape_of(st), 1);
  const KernelSet k = random_kernels(static_cast<int>(st.range(1)), x.channels(), 2);
  const Tensor4 g = random_tensor(conv3d_output_shape(x.shape(), k.out_channels, k.size, {}), 3);
  for (auto _ : st) benchmark::DoNotOptimize(reference::conv3d_backward(x, k, g));
}
BENCHMARK(BM_Conv3dBackwardReference)->Apply(conv_args);

void BM_MaxPool(benchmark::State& st) {
  const Tensor4 x = random_tensor({32, 8, 80, 112}, 4);
  for (auto _ : st) benchmark::DoNotOptimize(maxpool3d(x, {2, 2, 2}, {2, 2, 2}));
}
BENCHMARK(BM_MaxPool)->Unit(benchmark::kMillisecond);

void BM_MaxPoolReference(benchmark::State& st) {
  const Tensor4 x = random_tensor({32, 8, 80, 112}, 4);
  for (auto _ : st) benchmark::DoNotOptimize(reference::maxpool3d(x, {2, 2, 2}, {2, 2, 2}));
}
BENCHMARK(BM_MaxPoolReference)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
