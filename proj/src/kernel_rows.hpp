#pragma once

// Per-row bodies shared by the serial and OpenMP kernels. Keeping the inner
// loops in one place is what makes the two variants bitwise identical.

#include <cstddef>
#include <limits>
#include <span>

#include "cnagnn/csr.hpp"
#include "cnagnn/kernels.hpp"

namespace cnagnn::kernels::rows {

inline void gemm_nn_row(std::size_t i, GemmDims d, const double* a, const double* b, double* c,
                        bool accumulate) {
  double* ci = c + i * d.n;
  if (!accumulate) {
    for (std::size_t j = 0; j < d.n; ++j) ci[j] = 0.0;
  }
  const double* ai = a + i * d.k;
  for (std::size_t p = 0; p < d.k; ++p) {
    const double s = ai[p];
    const double* bp = b + p * d.n;
    for (std::size_t j = 0; j < d.n; ++j) ci[j] += s * bp[j];
  }
}

inline void gemm_nt_row(std::size_t i, GemmDims d, const double* a, const double* b, double* c,
                        bool accumulate) {
  double* ci = c + i * d.n;
  const double* ai = a + i * d.k;
  for (std::size_t j = 0; j < d.n; ++j) {
    const double* bj = b + j * d.k;
    double acc = 0.0;
    for (std::size_t p = 0; p < d.k; ++p) acc += ai[p] * bj[p];
    ci[j] = accumulate ? ci[j] + acc : acc;
  }
}

inline void gemm_tn_row(std::size_t i, GemmDims d, const double* a, const double* b, double* c,
                        bool accumulate) {
  double* ci = c + i * d.n;
  if (!accumulate) {
    for (std::size_t j = 0; j < d.n; ++j) ci[j] = 0.0;
  }
  for (std::size_t p = 0; p < d.k; ++p) {
    const double s = a[p * d.m + i];
    const double* bp = b + p * d.n;
    for (std::size_t j = 0; j < d.n; ++j) ci[j] += s * bp[j];
  }
}

inline void spmm_row(std::size_t i, const CsrMatrix& s, const double* x, std::size_t width,
                     double* out, bool accumulate) {
  double* oi = out + i * width;
  if (!accumulate) {
    for (std::size_t j = 0; j < width; ++j) oi[j] = 0.0;
  }
  for (std::size_t e = s.offsets[i]; e < s.offsets[i + 1]; ++e) {
    const double v = s.values[e];
    const double* xr = x + s.indices[e] * width;
    for (std::size_t j = 0; j < width; ++j) oi[j] += v * xr[j];
  }
}

inline void nearest_row(std::size_t i, std::size_t dim, const double* points,
                        const double* centroids, std::size_t num_centroids, int* assignment,
                        double* distance2) {
  const double* xi = points + i * dim;
  double best = std::numeric_limits<double>::infinity();
  int best_k = 0;
  for (std::size_t k = 0; k < num_centroids; ++k) {
    const double* ck = centroids + k * dim;
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double diff = xi[j] - ck[j];
      acc += diff * diff;
    }
    if (acc < best) {
      best = acc;
      best_k = static_cast<int>(k);
    }
  }
  assignment[i] = best_k;
  distance2[i] = best;
}

}  // namespace cnagnn::kernels::rows
