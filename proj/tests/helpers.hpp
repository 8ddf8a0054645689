#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cnagnn/graph.hpp"
#include "cnagnn/tensor.hpp"

namespace testing {

inline cnagnn::Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                    double lo = -2.0, double hi = 2.0, bool requires_grad = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = dist(rng);
  return cnagnn::Tensor::from(rows, cols, std::move(v), requires_grad);
}

// Erdos-Renyi style graph with a spanning path so no node is isolated.
inline cnagnn::GraphBundle random_graph(std::size_t n, std::size_t features, std::size_t classes,
                                        double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  cnagnn::GraphBundle b;
  b.num_nodes = n;
  b.num_features = features;
  b.task = cnagnn::TaskKind::classify;
  b.num_classes = classes;
  std::vector<cnagnn::Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (coin(rng)) edges.push_back({i, j});
    }
  }
  b.edges = cnagnn::canonical_edges(std::move(edges));
  b.features = random_tensor(n, features, seed + 1, -2.0, 2.0, false);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(i % classes));
  return b;
}

inline cnagnn::GraphBundle triangle() {
  cnagnn::GraphBundle b;
  b.num_nodes = 3;
  b.num_features = 2;
  b.task = cnagnn::TaskKind::classify;
  b.num_classes = 2;
  b.edges = {{0, 1}, {0, 2}, {1, 2}};
  b.features = cnagnn::Tensor::from(3, 2, {1, 0, 0, 1, 1, 1});
  b.labels = {0, 0, 1};
  return b;
}

}  // namespace testing
