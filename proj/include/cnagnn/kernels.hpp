#pragma once

// Dense and sparse compute kernels.
//
// Every kernel exists twice: a serial reference in `kernels::serial` and a
// row-parallel OpenMP version in `kernels::omp`. Both evaluate each output
// element with the same sequence of floating-point operations, so their
// results agree bitwise for any thread count. The unqualified names in
// `kernels` forward to the OpenMP versions.

#include <cstddef>
#include <span>

#include "cnagnn/csr.hpp"

namespace cnagnn::kernels {

/// Row-major GEMM dimensions: C is m x n, the inner dimension is k.
struct GemmDims {
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t n = 0;
};

namespace serial {

/// C (+)= A * B with A m x k, B k x n.
void gemm_nn(GemmDims dims, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
/// C (+)= A * B^T with A m x k, B n x k.
void gemm_nt(GemmDims dims, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
/// C (+)= A^T * B with A k x m, B k x n.
void gemm_tn(GemmDims dims, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
/// out (+)= S * x, x is S.cols x width.
void spmm(const CsrMatrix& s, std::span<const double> x, std::size_t width,
          std::span<double> out, bool accumulate);
/// Nearest centroid by squared Euclidean distance; ties go to the lowest index.
void nearest_centroid(std::span<const double> points, std::size_t num_points, std::size_t dim,
                      std::span<const double> centroids, std::size_t num_centroids,
                      std::span<int> assignment, std::span<double> distance2);

}  // namespace serial

namespace omp {

void gemm_nn(GemmDims dims, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
void gemm_nt(GemmDims dims, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
void gemm_tn(GemmDims dims, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
void spmm(const CsrMatrix& s, std::span<const double> x, std::size_t width,
          std::span<double> out, bool accumulate);
void nearest_centroid(std::span<const double> points, std::size_t num_points, std::size_t dim,
                      std::span<const double> centroids, std::size_t num_centroids,
                      std::span<int> assignment, std::span<double> distance2);

}  // namespace omp

using omp::gemm_nn;
using omp::gemm_nt;
using omp::gemm_tn;
using omp::nearest_centroid;
using omp::spmm;

/// Threads available to the parallel kernels (1 when built without OpenMP).
int max_threads();

}  // namespace cnagnn::kernels
