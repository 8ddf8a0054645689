#pragma once

#include <span>
#include <vector>

#include "cnagnn/graph.hpp"
#include "cnagnn/tensor.hpp"

namespace cnagnn {

/// Node selection; true marks a node that participates.
using Mask = std::vector<bool>;

/// (1/|V|) * sum over undirected edges of ||h_i - h_j||^2, each edge once.
double dirichlet_energy(std::span<const Edge> edges, const Tensor& h);

/// Mean cosine distance 1 - cos(h_i, h_j) over edges whose endpoints both have
/// non-zero rows. Throws ContractError when no edge qualifies.
double mad(std::span<const Edge> edges, const Tensor& h);

/// Fraction of masked rows whose argmax (lowest index on ties) equals the label.
double accuracy(const Tensor& logits, std::span<const int> labels, const Mask& mask);

/// sum (pred - y)^2 / sum (y - mean y)^2 over the mask. pred is n x 1.
double nmse(const Tensor& pred, std::span<const double> target, const Mask& mask);

/// Mean negative log-softmax of the labelled class over masked rows.
Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> labels,
                          const Mask& mask);

/// Mean squared error over masked rows of an n x 1 prediction.
Tensor mse_loss(const Tensor& pred, std::span<const double> target, const Mask& mask);

/// Per-layer oversmoothing summary recorded during a forward pass.
struct LayerTrace {
  std::vector<double> dirichlet;
  std::vector<double> mad;  // NaN where undefined
};

}  // namespace cnagnn
