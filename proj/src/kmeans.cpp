#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "cnagnn/cna.hpp"
#include "cnagnn/errors.hpp"
#include "cnagnn/kernels.hpp"

namespace cnagnn {

std::vector<std::size_t> KMeansState::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
  return sizes;
}

namespace {

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double diff = a[j] - b[j];
    acc += diff * diff;
  }
  return acc;
}

std::vector<double> kmeans_plus_plus(std::span<const double> points, std::size_t n, std::size_t dim,
                                     std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> centroids;
  centroids.reserve(k * dim);
  std::vector<bool> chosen(n, false);

  auto take = [&](std::size_t i) {
    chosen[i] = true;
    centroids.insert(centroids.end(), points.begin() + static_cast<std::ptrdiff_t>(i * dim),
                     points.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
  };

  take(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(&points[i * dim], centroids.data(), dim);

  // Greedy variant: draw a few D^2-weighted candidates per step and keep the
  // one that lowers the total potential most. A single draw too often lands
  // a second seed in an already covered blob.
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  std::vector<double> trial_d2(n), best_d2(n);
  while (centroids.size() < k * dim) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (!(total > 0.0)) {
      // All remaining points coincide with a centroid.
      take(static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin()));
      continue;
    }
    std::size_t best = n;
    double best_potential = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      const double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      std::size_t pick = n;
      double cumulative = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cumulative += d2[i];
        if (d2[i] > 0.0 && r < cumulative) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        // r landed on the rounding slack past the last positive weight.
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
      double potential = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        trial_d2[i] = std::min(d2[i], squared_distance(&points[i * dim], &points[pick * dim], dim));
        potential += trial_d2[i];
      }
      if (potential < best_potential) {
        best_potential = potential;
        best = pick;
        best_d2.swap(trial_d2);
      }
    }
    take(best);
    d2.swap(best_d2);
  }
  return centroids;
}

/// Gives every empty cluster the point farthest from its centroid, taken from
/// a cluster that keeps at least one member.
void repair_empty_clusters(std::size_t k, std::vector<int>& assignment, std::vector<double>& d2) {
  std::vector<std::size_t> sizes(k, 0);
  for (int a : assignment) ++sizes[static_cast<std::size_t>(a)];
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] != 0) continue;
    std::size_t far = assignment.size();
    double far_d2 = -1.0;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (sizes[static_cast<std::size_t>(assignment[i])] > 1 && d2[i] > far_d2) {
        far = i;
        far_d2 = d2[i];
      }
    }
    assert(far < assignment.size());
    --sizes[static_cast<std::size_t>(assignment[far])];
    assignment[far] = static_cast<int>(c);
    sizes[c] = 1;
    d2[far] = 0.0;
  }
}

void relabel_by_first_member(KMeansState& s) {
  std::vector<int> map(s.k, -1);
  int next = 0;
  for (int a : s.assignments) {
    if (map[static_cast<std::size_t>(a)] < 0) map[static_cast<std::size_t>(a)] = next++;
  }
  std::vector<double> centroids(s.centroids.size());
  for (std::size_t c = 0; c < s.k; ++c) {
    const auto to = static_cast<std::size_t>(map[c]);
    std::copy_n(s.centroids.begin() + static_cast<std::ptrdiff_t>(c * s.dim), s.dim,
                centroids.begin() + static_cast<std::ptrdiff_t>(to * s.dim));
  }
  s.centroids = std::move(centroids);
  for (int& a : s.assignments) a = map[static_cast<std::size_t>(a)];
}

}  // namespace

KMeansState kmeans_fit(std::span<const double> points, std::size_t num_points, std::size_t dim,
                       const KMeansOptions& options,
                       std::optional<std::span<const double>> warm_centroids) {
  const std::size_t k = options.k;
  if (k < 1) throw ContractError("kmeans_fit: k must be at least 1");
  if (num_points < k) {
    throw ContractError("kmeans_fit: " + std::to_string(num_points) + " points cannot form " +
                        std::to_string(k) + " clusters");
  }
  if (options.max_iter < 1) throw ContractError("kmeans_fit: max_iter must be at least 1");
  if (points.size() != num_points * dim) throw DimensionError("kmeans_fit: points size mismatch");
  for (double v : points) {
    if (!std::isfinite(v)) throw NumericError("kmeans_fit: non-finite feature value");
  }

  KMeansState s;
  s.k = k;
  s.dim = dim;
  const bool fresh = !warm_centroids.has_value();
  if (fresh) {
    s.centroids = kmeans_plus_plus(points, num_points, dim, k, options.seed);
  } else {
    if (warm_centroids->size() != k * dim) throw DimensionError("kmeans_fit: warm centroids shape mismatch");
    s.centroids.assign(warm_centroids->begin(), warm_centroids->end());
  }

  std::vector<int> assignment(num_points, 0);
  std::vector<double> d2(num_points, 0.0);
  std::vector<double> next(k * dim);
  std::vector<std::size_t> sizes(k);
  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    kernels::nearest_centroid(points, num_points, dim, s.centroids, k, assignment, d2);
    repair_empty_clusters(k, assignment, d2);

    std::fill(next.begin(), next.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < num_points; ++i) {
      const auto c = static_cast<std::size_t>(assignment[i]);
      ++sizes[c];
      for (std::size_t j = 0; j < dim; ++j) next[c * dim + j] += points[i * dim + j];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double inv = 1.0 / static_cast<double>(sizes[c]);
      for (std::size_t j = 0; j < dim; ++j) next[c * dim + j] *= inv;
      shift = std::max(shift, std::sqrt(squared_distance(&next[c * dim], &s.centroids[c * dim], dim)));
    }
    s.centroids.swap(next);

    double inertia = 0.0;
    for (std::size_t i = 0; i < num_points; ++i) {
      inertia += squared_distance(&points[i * dim],
                                  &s.centroids[static_cast<std::size_t>(assignment[i]) * dim], dim);
    }
    assert(s.inertia_history.empty() ||
           inertia <= s.inertia_history.back() * (1.0 + 1e-12) + 1e-300);
    s.inertia_history.push_back(inertia);
    s.inertia = inertia;
    s.iterations = iter + 1;

    const bool unchanged = iter > 0 && assignment == s.assignments;
    s.assignments = assignment;
    if (unchanged || shift < options.tol) break;
  }

  if (fresh) relabel_by_first_member(s);
  return s;
}

}  // namespace cnagnn
