#include "cnagnn/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cnagnn/errors.hpp"

namespace cnagnn {

namespace {

std::size_t count_mask(const Mask& mask, std::size_t rows, const char* op) {
  if (mask.size() != rows) throw DimensionError(std::string(op) + ": mask size differs from rows");
  const auto n = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (n == 0) throw ContractError(std::string(op) + ": empty mask");
  return n;
}

}  // namespace

double dirichlet_energy(std::span<const Edge> edges, const Tensor& h) {
  const std::size_t d = h.cols();
  const auto v = h.values();
  double total = 0.0;
  for (const auto& e : edges) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = v[e.u * d + j] - v[e.v * d + j];
      total += diff * diff;
    }
  }
  return h.rows() == 0 ? 0.0 : total / static_cast<double>(h.rows());
}

double mad(std::span<const Edge> edges, const Tensor& h) {
  const std::size_t n = h.rows();
  const std::size_t d = h.cols();
  const auto v = h.values();
  std::vector<double> norm(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += v[i * d + j] * v[i * d + j];
    norm[i] = std::sqrt(s);
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (const auto& e : edges) {
    if (norm[e.u] == 0.0 || norm[e.v] == 0.0) continue;
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += v[e.u * d + j] * v[e.v * d + j];
    total += 1.0 - dot / (norm[e.u] * norm[e.v]);
    ++pairs;
  }
  if (pairs == 0) throw ContractError("mad: no edge with two non-zero endpoint rows");
  return total / static_cast<double>(pairs);
}

double accuracy(const Tensor& logits, std::span<const int> labels, const Mask& mask) {
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  if (labels.size() != n) throw DimensionError("accuracy: label count differs from rows");
  const std::size_t total = count_mask(mask, n, "accuracy");
  const auto v = logits.values();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const auto row = v.subspan(i * c, c);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    correct += best == labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

double nmse(const Tensor& pred, std::span<const double> target, const Mask& mask) {
  const std::size_t n = pred.rows();
  if (pred.cols() != 1) throw DimensionError("nmse: prediction must be a column");
  if (target.size() != n) throw DimensionError("nmse: target count differs from rows");
  const std::size_t m = count_mask(mask, n, "nmse");
  if (m < 2) throw ContractError("nmse: mask needs at least two nodes");
  const auto p = pred.values();
  double mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) mean_y += target[i];
  }
  mean_y /= static_cast<double>(m);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    num += (p[i] - target[i]) * (p[i] - target[i]);
    den += (target[i] - mean_y) * (target[i] - mean_y);
  }
  if (den == 0.0) throw ContractError("nmse: target has zero variance on the mask");
  return num / den;
}

Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> labels,
                          const Mask& mask) {
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  if (labels.size() != n) throw DimensionError("cross_entropy: label count differs from rows");
  const std::size_t m = count_mask(mask, n, "cross_entropy");
  const auto v = logits.values();

  // Softmax probabilities of masked rows, kept for the backward pass.
  std::vector<double> prob(n * c, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const auto row = v.subspan(i * c, c);
    const double top = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - top);
    const double log_z = std::log(z) + top;
    for (std::size_t j = 0; j < c; ++j) prob[i * c + j] = std::exp(row[j] - log_z);
    loss += log_z - row[static_cast<std::size_t>(labels[i])];
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<int> y(labels.begin(), labels.end());
  Mask keep = mask;
  return record_op("cross_entropy", {1, 1}, {loss * inv_m}, {logits},
                   [logits, prob = std::move(prob), y = std::move(y), keep = std::move(keep), n, c,
                    inv_m](std::span<const double> g) mutable {
                     auto gl = logits.grad_accumulator();
                     const double s = g[0] * inv_m;
                     for (std::size_t i = 0; i < n; ++i) {
                       if (!keep[i]) continue;
                       for (std::size_t j = 0; j < c; ++j) {
                         const double onehot = static_cast<std::size_t>(y[i]) == j ? 1.0 : 0.0;
                         gl[i * c + j] += s * (prob[i * c + j] - onehot);
                       }
                     }
                   });
}

Tensor mse_loss(const Tensor& pred, std::span<const double> target, const Mask& mask) {
  const std::size_t n = pred.rows();
  if (pred.cols() != 1) throw DimensionError("mse: prediction must be a column");
  if (target.size() != n) throw DimensionError("mse: target count differs from rows");
  const std::size_t m = count_mask(mask, n, "mse");
  const auto p = pred.values();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) loss += (p[i] - target[i]) * (p[i] - target[i]);
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<double> t(target.begin(), target.end());
  Mask keep = mask;
  return record_op("mse", {1, 1}, {loss * inv_m}, {pred},
                   [pred, t = std::move(t), keep = std::move(keep), n, inv_m](
                       std::span<const double> g) mutable {
                     auto gp = pred.grad_accumulator();
                     const auto p = pred.values();
                     for (std::size_t i = 0; i < n; ++i) {
                       if (keep[i]) gp[i] += g[0] * inv_m * 2.0 * (p[i] - t[i]);
                     }
                   });
}

}  // namespace cnagnn
