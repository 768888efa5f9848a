// Serial reference vs OpenMP kernels. The argument is the frame side or the
// matrix dimension.
#include <benchmark/benchmark.h>

#include <random>

#include "ebench/kernels.hpp"

using namespace ebench;

namespace {

std::vector<double> random_plane(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 255);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

Frame random_frame(int side, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  Frame f(side, side);
  for (auto& c : f.rgb) c = static_cast<std::uint8_t>(u(rng));
  return f;
}

template <auto Fn>
void bm_ssim(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto a = random_plane(static_cast<std::size_t>(side) * side, 1);
  const auto b = random_plane(static_cast<std::size_t>(side) * side, 2);
  const kernels::SsimParams params;
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b, side, side, {}, params));
  state.SetItemsProcessed(state.iterations() * side * side);
}

template <auto Fn>
void bm_warp(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto frame = random_frame(side, 3);
  const FlowField flow(side, side, 1.25f, -0.75f);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(frame, flow));
  state.SetItemsProcessed(state.iterations() * side * side);
}

template <auto Fn>
void bm_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_plane(n * n, 4);
  const auto b = random_plane(n * n, 5);
  std::vector<double> c(n * n);
  const kernels::GemmShape shape{n, n, n};
  for (auto _ : state) {
    Fn(a.data(), b.data(), c.data(), shape);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}

}  // namespace

BENCHMARK(bm_ssim<kernels::serial::ssim>)->Name("ssim/serial")->Arg(64)->Arg(224)->Arg(512);
BENCHMARK(bm_ssim<kernels::parallel::ssim>)->Name("ssim/parallel")->Arg(64)->Arg(224)->Arg(512)->UseRealTime();
BENCHMARK(bm_warp<kernels::serial::warp_bilinear>)->Name("warp/serial")->Arg(64)->Arg(224)->Arg(512);
BENCHMARK(bm_warp<kernels::parallel::warp_bilinear>)->Name("warp/parallel")->Arg(64)->Arg(224)->Arg(512)->UseRealTime();
BENCHMARK(bm_gemm<kernels::serial::gemm>)->Name("gemm/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_gemm<kernels::parallel::gemm>)->Name("gemm/parallel")->Arg(64)->Arg(128)->Arg(256)->UseRealTime();

BENCHMARK_MAIN();
