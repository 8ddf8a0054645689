#include <cassert>

#include "cnagnn/kernels.hpp"
#include "kernel_rows.hpp"

namespace cnagnn::kernels::serial {

void gemm_nn(GemmDims dims, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  assert(a.size() == dims.m * dims.k && b.size() == dims.k * dims.n && c.size() == dims.m * dims.n);
  for (std::size_t i = 0; i < dims.m; ++i) {
    rows::gemm_nn_row(i, dims, a.data(), b.data(), c.data(), accumulate);
  }
}

void gemm_nt(GemmDims dims, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  assert(a.size() == dims.m * dims.k && b.size() == dims.n * dims.k && c.size() == dims.m * dims.n);
  for (std::size_t i = 0; i < dims.m; ++i) {
    rows::gemm_nt_row(i, dims, a.data(), b.data(), c.data(), accumulate);
  }
}

void gemm_tn(GemmDims dims, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  assert(a.size() == dims.k * dims.m && b.size() == dims.k * dims.n && c.size() == dims.m * dims.n);
  for (std::size_t i = 0; i < dims.m; ++i) {
    rows::gemm_tn_row(i, dims, a.data(), b.data(), c.data(), accumulate);
  }
}

void spmm(const CsrMatrix& s, std::span<const double> x, std::size_t width,
          std::span<double> out, bool accumulate) {
  assert(x.size() == s.cols * width && out.size() == s.rows * width);
  for (std::size_t i = 0; i < s.rows; ++i) {
    rows::spmm_row(i, s, x.data(), width, out.data(), accumulate);
  }
}

void nearest_centroid(std::span<const double> points, std::size_t num_points, std::size_t dim,
                      std::span<const double> centroids, std::size_t num_centroids,
                      std::span<int> assignment, std::span<double> distance2) {
  assert(points.size() == num_points * dim && centroids.size() == num_centroids * dim);
  assert(assignment.size() == num_points && distance2.size() == num_points);
  for (std::size_t i = 0; i < num_points; ++i) {
    rows::nearest_row(i, dim, points.data(), centroids.data(), num_centroids, assignment.data(),
                      distance2.data());
  }
}

}  // namespace cnagnn::kernels::serial
