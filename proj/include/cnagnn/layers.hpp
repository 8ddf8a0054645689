#pragma once

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "cnagnn/cna.hpp"
#include "cnagnn/graph.hpp"
#include "cnagnn/metrics.hpp"
#include "cnagnn/tensor.hpp"

namespace cnagnn {

enum class Arch { gcn, sage };
enum class Activation { none, relu, cna };

const char* to_string(Arch arch);
const char* to_string(Activation activation);

/// Sparse operators derived once from a bundle's edge set.
struct GraphOperators {
  SparseOperator gcn;   // D^-1/2 (A + I) D^-1/2
  SparseOperator mean;  // neighbour mean, no self-loops

  static GraphOperators from(const GraphBundle& bundle);
};

/// h -> A_hat h W + b.
class GcnLayer {
 public:
  GcnLayer(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng);

  Parameter weight;
  Parameter bias;
};

/// h -> h W_self + mean_{j in N(i)} h_j W_neigh + b.
class SageLayer {
 public:
  SageLayer(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng);

  Parameter weight_self;
  Parameter weight_neigh;
  Parameter bias;
};

Tensor gcn_forward(const GcnLayer& layer, const SparseOperator& adjacency, const Tensor& h);
Tensor sage_forward(const SageLayer& layer, const SparseOperator& mean_aggregator, const Tensor& h);

struct CnaConfig {
  std::size_t k = 4;
  double eps = 1e-5;
  bool warm_start = true;
  CnaSteps steps = CnaSteps::all();
};

struct ModelConfig {
  Arch arch = Arch::gcn;
  std::size_t num_layers = 2;
  std::size_t in_dim = 0;
  std::size_t hidden = 16;
  /// Number of classes, or 1 for regression.
  std::size_t out_dim = 0;
  Activation activation = Activation::relu;
  CnaConfig cna;

  void validate() const;
};

/// A stack of message-passing layers. Every layer except the last is followed
/// by the configured activation stage; the last layer emits raw outputs.
class Model {
 public:
  using Layer = std::variant<GcnLayer, SageLayer>;

  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  /// One entry per activation stage when the activation is CNA, else empty.
  std::vector<CnaLayerState>& cna_states() noexcept { return cna_states_; }
  const std::vector<CnaLayerState>& cna_states() const noexcept { return cna_states_; }

  /// All trainable tensors; handles share storage with the model.
  std::vector<Parameter> parameters() const;

  /// Runs the stack. When `trace` is given, records oversmoothing statistics
  /// of every layer's output (after its activation stage).
  Tensor forward(const GraphOperators& ops, const Tensor& features, Mode mode,
                 std::span<const Edge> edges = {}, LayerTrace* trace = nullptr);

 private:
  ModelConfig config_;
  std::vector<Layer> layers_;
  std::vector<CnaLayerState> cna_states_;
};

/// Convenience entry point that derives the operators from the bundle.
Tensor model_forward(Model& model, const GraphBundle& bundle, Mode mode,
                     LayerTrace* trace = nullptr);

/// Total number of trainable scalars, rational coefficients included.
std::size_t param_count(const Model& model);

/// The shared initial rational: a least-squares fit of leaky ReLU (slope 0.01)
/// on [-3, 3], computed once per process.
const RationalCoeffs& default_rational_init();

}  // namespace cnagnn
