#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cnagnn/csr.hpp"
#include "cnagnn/tensor.hpp"

namespace cnagnn {

enum class TaskKind { classify, regress };
enum class Split { train, val, test };

const char* to_string(TaskKind task);
const char* to_string(Split split);

/// Undirected edge stored with u < v.
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;

  auto operator<=>(const Edge&) const = default;
};

/// One graph with node features, targets and an optional node split.
struct GraphBundle {
  std::size_t num_nodes = 0;
  std::size_t num_features = 0;
  TaskKind task = TaskKind::classify;
  std::size_t num_classes = 0;  // classify only
  Tensor features;              // num_nodes x num_features, no gradient
  std::vector<Edge> edges;      // sorted, unique, no self-loops
  std::vector<int> labels;      // classify
  std::vector<double> targets;  // regress
  std::vector<Split> splits;    // empty when the bundle carries none

  /// Throws ContractError when an invariant does not hold.
  void validate() const;
};

/// Value equality, comparing feature values rather than tensor identity.
bool operator==(const GraphBundle& a, const GraphBundle& b);

/// Sorts, orients (u < v) and deduplicates an edge list, dropping self-loops.
std::vector<Edge> canonical_edges(std::vector<Edge> edges);

/// Reads a bundle directory (meta.json, edges.tsv, features.tsv, labels.tsv,
/// optional splits.tsv).
GraphBundle load_bundle(const std::filesystem::path& dir);

/// Writes a bundle in the directory format read by `load_bundle`. Floats are
/// written with 17 significant digits so the round trip is exact.
void write_bundle(const GraphBundle& bundle, const std::filesystem::path& dir);

/// Symmetrically normalized adjacency with self-loops:
/// D^-1/2 (A + I) D^-1/2, D the degree matrix of A + I.
CsrMatrix gcn_normalize(const GraphBundle& bundle);

/// Row-normalized neighbour-mean operator without self-loops. Rows of isolated
/// nodes are empty, so they aggregate to zero.
CsrMatrix mean_aggregator(const GraphBundle& bundle);

/// Mean over non-isolated nodes of the fraction of neighbours sharing the
/// node's label. Throws ContractError on regression bundles.
double node_homophily(const GraphBundle& bundle);

struct SbmParams {
  std::size_t num_nodes = 400;
  std::size_t num_blocks = 4;
  double p_in = 0.1;
  double p_out = 0.01;
  std::size_t feature_dim = 16;
  double block_mean_separation = 3.0;
  double feature_noise_sigma = 1.0;
  std::uint64_t seed = 0;
  TaskKind task = TaskKind::classify;
  /// Regression only: additive Gaussian noise on the per-block targets, which
  /// are log-spaced from 1e-5 (block 0) to 1 (last block).
  double target_noise_sigma = 1e-3;

  void validate() const;
};

/// Stochastic block model with Gaussian block-mean features. Block b holds
/// nodes [b*n/B, (b+1)*n/B) and its feature mean is separation * e_b.
GraphBundle generate_sbm(const SbmParams& params);

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct SplitResult {
  std::vector<Split> tags;
  std::vector<std::string> warnings;
};

/// Random node split. Classification bundles are stratified by class; when
/// some class has fewer than 3 members the split falls back to unstratified
/// and a warning is recorded.
SplitResult make_splits(const GraphBundle& bundle, SplitFractions fractions, std::uint64_t seed);

/// Relabels nodes: node i of the input becomes node perm[i] of the output.
GraphBundle permute_nodes(const GraphBundle& bundle, const std::vector<std::size_t>& perm);

/// Per-node neighbour lists built from the canonical edge list.
std::vector<std::vector<std::size_t>> neighbor_lists(const GraphBundle& bundle);

}  // namespace cnagnn
