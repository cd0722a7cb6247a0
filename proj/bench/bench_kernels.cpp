// Serial reference kernels against their OpenMP versions. Both variants take
// identical inputs; the argument is the problem size.

#include <vector>

#include <benchmark/benchmark.h>

#include "thermoscan/kernels.hpp"
#include "thermoscan/rng.hpp"

using namespace thermoscan;
namespace k = thermoscan::kernels;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  auto rng = make_rng(seed, {});
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * uniform01(rng);
  return v;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  const auto v = noise(rows * cols, seed);
  std::copy(v.begin(), v.end(), m.data().begin());
  return m;
}

template <auto Fn>
void squared_distances(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto points = random_matrix(n, 16, 1);
  const auto query = noise(16, 2);
  std::vector<double> out(n);
  for (auto _ : state) {
    Fn(points, query, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}

template <auto Fn>
void pearson(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto data = random_matrix(500, d, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(data));
}

template <auto Fn>
void heat_step(benchmark::State& state) {
  const auto nx = static_cast<std::size_t>(state.range(0));
  const std::size_t ny = nx, n = nx * ny;
  const auto rc = noise(n, 4, 3e6, 4e6), ge = noise(n, 5, 1e3, 2e3), gs = noise(n, 6, 1e3, 2e3);
  const auto a = noise(n, 7, 0, 1e4), b = noise(n, 8, 0, 1e3), t = noise(n, 9, 30, 37);
  const k::HeatStepInput in{nx, ny, 10.0, rc, ge, gs, a, b};
  std::vector<double> next(n);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(in, t, next));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}

template <auto Fn>
void conv2d(benchmark::State& state) {
  const auto hw = static_cast<std::size_t>(state.range(0));
  const k::ConvShape s{16, 8, hw, hw, 16, 3};
  const auto in = noise(s.n * s.cin * s.h * s.w, 10);
  const auto w = noise(s.cout * s.cin * s.k * s.k, 11, -0.1, 0.1);
  const auto bias = noise(s.cout, 12);
  std::vector<double> out(s.n * s.cout * s.h * s.w);
  for (auto _ : state) {
    Fn(s, in, w, bias, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(squared_distances<k::squared_distances_serial>)->Name("squared_distances/serial")->Range(1 << 10, 1 << 18);
BENCHMARK(squared_distances<k::squared_distances_parallel>)->Name("squared_distances/parallel")->Range(1 << 10, 1 << 18)->UseRealTime();
BENCHMARK(pearson<k::pearson_serial>)->Name("pearson/serial")->Arg(16)->Arg(64)->Arg(128);
BENCHMARK(pearson<k::pearson_parallel>)->Name("pearson/parallel")->Arg(16)->Arg(64)->Arg(128)->UseRealTime();
BENCHMARK(heat_step<k::heat_step_serial>)->Name("heat_step/serial")->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(heat_step<k::heat_step_parallel>)->Name("heat_step/parallel")->Arg(64)->Arg(256)->Arg(1024)->UseRealTime();
BENCHMARK(conv2d<k::conv2d_forward_serial>)->Name("conv2d/serial")->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(conv2d<k::conv2d_forward_parallel>)->Name("conv2d/parallel")->Arg(16)->Arg(32)->Arg(64)->UseRealTime();

BENCHMARK_MAIN();
