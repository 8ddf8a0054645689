// Serial reference kernels against their OpenMP counterparts.
// Thread count comes from OMP_NUM_THREADS.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "cnagnn/graph.hpp"
#include "cnagnn/kernels.hpp"

using namespace cnagnn;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

template <auto Kernel>
void gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const kernels::GemmDims dims{n, 64, 64};
  const auto a = random_values(dims.m * dims.k, 1);
  const auto b = random_values(dims.k * dims.n, 2);
  std::vector<double> c(dims.m * dims.n);
  for (auto _ : state) {
    Kernel(dims, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * dims.m * dims.k * dims.n));
}

template <auto Kernel>
void spmm(benchmark::State& state) {
  SbmParams p;
  p.num_nodes = static_cast<std::size_t>(state.range(0));
  p.p_in = 20.0 / static_cast<double>(p.num_nodes);
  p.p_out = 2.0 / static_cast<double>(p.num_nodes);
  const CsrMatrix s = gcn_normalize(generate_sbm(p));
  const std::size_t width = 64;
  const auto x = random_values(s.cols * width, 3);
  std::vector<double> out(s.rows * width);
  for (auto _ : state) {
    Kernel(s, x, width, out, false);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(s.nnz() * width));
}

template <auto Kernel>
void nearest(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 32, k = 16;
  const auto points = random_values(n * dim, 4);
  const auto centroids = random_values(k * dim, 5);
  std::vector<int> assignment(n);
  std::vector<double> d2(n);
  for (auto _ : state) {
    Kernel(points, n, dim, centroids, k, assignment, d2);
    benchmark::DoNotOptimize(assignment.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * k));
}

}  // namespace

BENCHMARK(gemm<kernels::serial::gemm_nn>)->Name("gemm_nn/serial")->Arg(1024)->Arg(8192);
BENCHMARK(gemm<kernels::omp::gemm_nn>)->Name("gemm_nn/omp")->Arg(1024)->Arg(8192);
BENCHMARK(spmm<kernels::serial::spmm>)->Name("spmm/serial")->Arg(2000)->Arg(20000);
BENCHMARK(spmm<kernels::omp::spmm>)->Name("spmm/omp")->Arg(2000)->Arg(20000);
BENCHMARK(nearest<kernels::serial::nearest_centroid>)->Name("nearest_centroid/serial")->Arg(10000);
BENCHMARK(nearest<kernels::omp::nearest_centroid>)->Name("nearest_centroid/omp")->Arg(10000);

BENCHMARK_MAIN();
