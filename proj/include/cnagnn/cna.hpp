#pragma once

// Cluster -> Normalize -> Activate.
//
// Node features are partitioned with k-means, standardized per cluster and
// per feature, and passed through one learnable rational function per
// cluster. Cluster assignments are hard, so gradients stop at the clustering;
// normalization and activation are differentiated exactly.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cnagnn/tensor.hpp"

namespace cnagnn {

struct KMeansOptions {
  std::size_t k = 1;
  std::size_t max_iter = 100;
  double tol = 1e-4;
  std::uint64_t seed = 0;
};

struct KMeansState {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;  // k x dim
  std::vector<int> assignments;   // one cluster id per point
  double inertia = 0.0;
  std::size_t iterations = 0;
  /// Inertia after every Lloyd iteration; non-increasing.
  std::vector<double> inertia_history;

  std::vector<std::size_t> cluster_sizes() const;
};

/// Lloyd's algorithm from greedy k-means++ seeding (2 + ln k D^2-weighted
/// candidates per new centroid, lowest potential kept), or from
/// `warm_centroids` when given (must be k x dim). Stops when assignments stop changing, when no
/// centroid moves more than `tol`, or after `max_iter` iterations. Empty
/// clusters seize the point farthest from its centroid. Nearest-centroid ties
/// go to the lowest cluster index. A fresh (k-means++) fit is relabelled so
/// cluster ids follow the smallest member index; warm starts keep the ids of
/// the centroids they were given.
KMeansState kmeans_fit(std::span<const double> points, std::size_t num_points, std::size_t dim,
                       const KMeansOptions& options,
                       std::optional<std::span<const double>> warm_centroids = std::nullopt);

/// Per-cluster, per-feature standardization (x - mu) / sqrt(var + eps) with
/// population variance and no affine rescale. Assignments are constants.
Tensor cluster_normalize(const Tensor& x, std::span<const int> assignments, std::size_t k,
                         double eps);

inline constexpr std::size_t kNumeratorDegree = 5;
inline constexpr std::size_t kDenominatorDegree = 4;

/// Coefficients of R(x) = sum_{k=0..5} a_k x^k / (1 + |sum_{k=1..4} b_k x^k|).
struct RationalCoeffs {
  Tensor numerator;    // 1 x 6: a_0 .. a_5
  Tensor denominator;  // 1 x 4: b_1 .. b_4

  static RationalCoeffs make(std::span<const double> numerator, std::span<const double> denominator,
                             bool requires_grad = true);
  /// a = (0, 1, 0, 0, 0, 0), b = 0.
  static RationalCoeffs identity(bool requires_grad = true);
  /// Deep copy with fresh leaves.
  RationalCoeffs clone(bool requires_grad = true) const;
  /// Scalar evaluation without the tape.
  double evaluate(double x) const;
  std::size_t num_params() const { return kNumeratorDegree + 1 + kDenominatorDegree; }
};

/// Elementwise rational activation, differentiable in x and in both coefficient tensors.
Tensor rational_forward(const Tensor& x, const RationalCoeffs& coeffs);

/// Applies coeffs[assignments[i]] to every entry of row i in a single tape operation.
Tensor rational_forward_clustered(const Tensor& x, std::span<const int> assignments,
                                  std::span<const RationalCoeffs> coeffs);

struct RationalFitReport {
  RationalCoeffs coeffs;
  double max_abs_error = 0.0;
  std::size_t rounds = 0;
};

/// Least-squares rational fit of leaky_relu(x, slope) on `samples` evenly
/// spaced points of [lo, hi]. Up to 50 rounds of alternating linear solves
/// (numerator, then linearized denominator) starting from b = 0 give a start
/// that Levenberg-Marquardt then refines. Throws Error if the max error on
/// the grid is not below `max_error`.
RationalFitReport rational_init_fit(double slope = 0.01, double lo = -3.0, double hi = 3.0,
                                    std::size_t samples = 1000, double max_error = 0.1);

/// Which of the three stages `cna_apply` runs.
struct CnaSteps {
  bool cluster = true;
  bool normalize = true;
  bool activate = true;

  static CnaSteps all() { return {}; }
  static CnaSteps none() { return {false, false, false}; }
  bool operator==(const CnaSteps&) const = default;
};

enum class Mode { train, eval };

struct CnaLayerState {
  std::size_t k = 1;
  double eps = 1e-5;
  bool warm_start = true;
  /// Reuse `kmeans.assignments` instead of refitting (gradient checks, frozen analyses).
  bool freeze_assignments = false;
  KMeansOptions kmeans_options;
  KMeansState kmeans;
  std::vector<RationalCoeffs> rationals;  // exactly k sets

  /// k rational sets, each a copy of `init`.
  static CnaLayerState make(std::size_t k, double eps, const RationalCoeffs& init,
                            std::uint64_t seed);
};

/// Cluster, normalize and activate `h`. With clustering disabled all rows
/// form one pseudo-cluster and rational set 0 is shared. In train mode the
/// fitted clustering is stored for the next warm start; eval mode fits from
/// the stored centroids without updating them.
Tensor cna_apply(const Tensor& h, CnaLayerState& state, Mode mode, CnaSteps steps = CnaSteps::all());

}  // namespace cnagnn
