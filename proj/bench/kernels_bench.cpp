// Serial reference vs OpenMP kernels at episode-sized batches.
// Run: ./build/bench/deepalloc_bench [--benchmark_filter=conv]

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "deepalloc/kernels.hpp"

namespace {

using deepalloc::kernels::ConvDims;
using deepalloc::kernels::DenseDims;

std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// First asset conv layer of the default policy: 4 assets -> 8 channels, 7 lags.
ConvDims episode_conv(std::size_t batch) {
  ConvDims d;
  d.batch = batch;
  d.in_ch = 8;
  d.height = 1;
  d.width = 7;
  d.out_ch = 5;
  d.kernel_h = 1;
  d.kernel_w = 3;
  return d;
}

template <auto Fn>
void BM_ConvForward(benchmark::State& state) {
  const auto d = episode_conv(static_cast<std::size_t>(state.range(0)));
  const auto x = random_vector(d.input_size(), 1);
  const auto w = random_vector(d.weight_size(), 2);
  const auto b = random_vector(d.out_ch, 3);
  std::vector<double> y(d.output_size());
  for (auto _ : state) {
    Fn(d, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(d.batch));
}

template <auto Fn>
void BM_ConvBackwardWeight(benchmark::State& state) {
  const auto d = episode_conv(static_cast<std::size_t>(state.range(0)));
  const auto x = random_vector(d.input_size(), 1);
  const auto dy = random_vector(d.output_size(), 4);
  std::vector<double> dw(d.weight_size());
  std::vector<double> db(d.out_ch);
  for (auto _ : state) {
    Fn(d, x, dy, dw, db);
    benchmark::DoNotOptimize(dw.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(d.batch));
}

template <auto Fn>
void BM_DenseForward(benchmark::State& state) {
  DenseDims d{static_cast<std::size_t>(state.range(0)), 80, 4};
  const auto x = random_vector(d.batch * d.in, 1);
  const auto w = random_vector(d.out * d.in, 2);
  const auto b = random_vector(d.out, 3);
  std::vector<double> y(d.batch * d.out);
  for (auto _ : state) {
    Fn(d, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(d.batch));
}

namespace serial = deepalloc::kernels::serial;
namespace omp = deepalloc::kernels::omp;

BENCHMARK(BM_ConvForward<serial::conv_forward>)->Name("conv_forward/serial")->Arg(256)->Arg(4096);
BENCHMARK(BM_ConvForward<omp::conv_forward>)->Name("conv_forward/omp")->Arg(256)->Arg(4096);
BENCHMARK(BM_ConvBackwardWeight<serial::conv_backward_weight>)->Name("conv_backward_weight/serial")->Arg(256)->Arg(4096);
BENCHMARK(BM_ConvBackwardWeight<omp::conv_backward_weight>)->Name("conv_backward_weight/omp")->Arg(256)->Arg(4096);
BENCHMARK(BM_DenseForward<serial::dense_forward>)->Name("dense_forward/serial")->Arg(256)->Arg(4096);
BENCHMARK(BM_DenseForward<omp::dense_forward>)->Name("dense_forward/omp")->Arg(256)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
