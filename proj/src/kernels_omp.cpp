#include <cassert>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cnagnn/kernels.hpp"
#include "kernel_rows.hpp"

namespace cnagnn::kernels {

namespace {
// Below this many flops a parallel region costs more than it saves.
constexpr std::size_t kParallelThreshold = 1 << 15;
}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace omp {

void gemm_nn(GemmDims dims, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  assert(a.size() == dims.m * dims.k && b.size() == dims.k * dims.n && c.size() == dims.m * dims.n);
  const auto m = static_cast<std::int64_t>(dims.m);
#pragma omp parallel for schedule(static) if (dims.m * dims.k * dims.n > kParallelThreshold)
  for (std::int64_t i = 0; i < m; ++i) {
    rows::gemm_nn_row(static_cast<std::size_t>(i), dims, a.data(), b.data(), c.data(), accumulate);
  }
}

void gemm_nt(GemmDims dims, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  assert(a.size() == dims.m * dims.k && b.size() == dims.n * dims.k && c.size() == dims.m * dims.n);
  const auto m = static_cast<std::int64_t>(dims.m);
#pragma omp parallel for schedule(static) if (dims.m * dims.k * dims.n > kParallelThreshold)
  for (std::int64_t i = 0; i < m; ++i) {
    rows::gemm_nt_row(static_cast<std::size_t>(i), dims, a.data(), b.data(), c.data(), accumulate);
  }
}

void gemm_tn(GemmDims dims, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  assert(a.size() == dims.k * dims.m && b.size() == dims.k * dims.n && c.size() == dims.m * dims.n);
  const auto m = static_cast<std::int64_t>(dims.m);
#pragma omp parallel for schedule(static) if (dims.m * dims.k * dims.n > kParallelThreshold)
  for (std::int64_t i = 0; i < m; ++i) {
    rows::gemm_tn_row(static_cast<std::size_t>(i), dims, a.data(), b.data(), c.data(), accumulate);
  }
}

void spmm(const CsrMatrix& s, std::span<const double> x, std::size_t width,
          std::span<double> out, bool accumulate) {
  assert(x.size() == s.cols * width && out.size() == s.rows * width);
  const auto rows_count = static_cast<std::int64_t>(s.rows);
#pragma omp parallel for schedule(static) if (s.nnz() * width > kParallelThreshold)
  for (std::int64_t i = 0; i < rows_count; ++i) {
    rows::spmm_row(static_cast<std::size_t>(i), s, x.data(), width, out.data(), accumulate);
  }
}

void nearest_centroid(std::span<const double> points, std::size_t num_points, std::size_t dim,
                      std::span<const double> centroids, std::size_t num_centroids,
                      std::span<int> assignment, std::span<double> distance2) {
  assert(points.size() == num_points * dim && centroids.size() == num_centroids * dim);
  assert(assignment.size() == num_points && distance2.size() == num_points);
  const auto n = static_cast<std::int64_t>(num_points);
#pragma omp parallel for schedule(static) if (num_points * num_centroids * dim > kParallelThreshold)
  for (std::int64_t i = 0; i < n; ++i) {
    rows::nearest_row(static_cast<std::size_t>(i), dim, points.data(), centroids.data(),
                      num_centroids, assignment.data(), distance2.data());
  }
}

}  // namespace omp
}  // namespace cnagnn::kernels
