#include "cnagnn/layers.hpp"

#include <cmath>
#include <limits>

#include "cnagnn/errors.hpp"

namespace cnagnn {

const char* to_string(Arch arch) { return arch == Arch::gcn ? "gcn" : "sage"; }

const char* to_string(Activation activation) {
  switch (activation) {
    case Activation::none:
      return "none";
    case Activation::relu:
      return "relu";
    case Activation::cna:
      return "cna";
  }
  return "?";
}

GraphOperators GraphOperators::from(const GraphBundle& bundle) {
  return {SparseOperator(gcn_normalize(bundle)), SparseOperator(mean_aggregator(bundle))};
}

namespace {

Tensor glorot(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> w(in_dim * out_dim);
  for (double& v : w) v = dist(rng);
  return Tensor::from(in_dim, out_dim, std::move(w), true);
}

void require_width(const Tensor& h, std::size_t in_dim, const char* op) {
  if (h.cols() != in_dim) {
    throw DimensionError(std::string(op) + ": input width " + std::to_string(h.cols()) +
                         " but layer expects " + std::to_string(in_dim));
  }
}

}  // namespace

GcnLayer::GcnLayer(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng)
    : weight{glorot(in_dim, out_dim, rng), ParamGroup::weights, "weight"},
      bias{Tensor::zeros(1, out_dim, true), ParamGroup::weights, "bias"} {}

SageLayer::SageLayer(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng)
    : weight_self{glorot(in_dim, out_dim, rng), ParamGroup::weights, "weight_self"},
      weight_neigh{glorot(in_dim, out_dim, rng), ParamGroup::weights, "weight_neigh"},
      bias{Tensor::zeros(1, out_dim, true), ParamGroup::weights, "bias"} {}

Tensor gcn_forward(const GcnLayer& layer, const SparseOperator& adjacency, const Tensor& h) {
  require_width(h, layer.weight.tensor.rows(), "gcn_forward");
  const Tensor& w = layer.weight.tensor;
  // Propagate through the narrower side of the projection.
  Tensor z = w.cols() < w.rows() ? spmm(adjacency, matmul(h, w)) : matmul(spmm(adjacency, h), w);
  return add_row(z, layer.bias.tensor);
}

Tensor sage_forward(const SageLayer& layer, const SparseOperator& mean_aggregator, const Tensor& h) {
  require_width(h, layer.weight_self.tensor.rows(), "sage_forward");
  Tensor self = matmul(h, layer.weight_self.tensor);
  Tensor neigh = matmul(spmm(mean_aggregator, h), layer.weight_neigh.tensor);
  return add_row(add(self, neigh), layer.bias.tensor);
}

void ModelConfig::validate() const {
  if (num_layers < 1) throw ContractError("model: need at least one layer");
  if (hidden < 1) throw ContractError("model: hidden width must be positive");
  if (in_dim < 1 || out_dim < 1) throw ContractError("model: input and output widths must be positive");
  if (activation == Activation::cna && cna.k < 1) throw ContractError("model: CNA needs k >= 1");
  if (activation == Activation::cna && !(cna.eps > 0.0)) throw ContractError("model: CNA eps must be positive");
}

const RationalCoeffs& default_rational_init() {
  static const RationalCoeffs fit = rational_init_fit().coeffs.clone(false);
  return fit;
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::size_t in = l == 0 ? config_.in_dim : config_.hidden;
    const std::size_t out = l + 1 == config_.num_layers ? config_.out_dim : config_.hidden;
    if (config_.arch == Arch::gcn) {
      layers_.emplace_back(GcnLayer(in, out, rng));
    } else {
      layers_.emplace_back(SageLayer(in, out, rng));
    }
  }
  if (config_.activation == Activation::cna) {
    for (std::size_t l = 0; l + 1 < config_.num_layers; ++l) {
      auto state = CnaLayerState::make(config_.cna.k, config_.cna.eps, default_rational_init(),
                                       seed * 1000003ULL + l + 1);
      state.warm_start = config_.cna.warm_start;
      cna_states_.push_back(std::move(state));
    }
  }
}

std::vector<Parameter> Model::parameters() const {
  std::vector<Parameter> params;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    std::visit(
        [&](const auto& layer) {
          using T = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<T, GcnLayer>) {
            for (const Parameter* p : {&layer.weight, &layer.bias}) {
              params.push_back({p->tensor, p->group, prefix + p->name});
            }
          } else {
            for (const Parameter* p : {&layer.weight_self, &layer.weight_neigh, &layer.bias}) {
              params.push_back({p->tensor, p->group, prefix + p->name});
            }
          }
        },
        layers_[l]);
  }
  for (std::size_t l = 0; l < cna_states_.size(); ++l) {
    const auto& rationals = cna_states_[l].rationals;
    for (std::size_t c = 0; c < rationals.size(); ++c) {
      const std::string prefix = "cna" + std::to_string(l) + ".cluster" + std::to_string(c) + ".";
      params.push_back({rationals[c].numerator, ParamGroup::activation_coeffs, prefix + "numerator"});
      params.push_back({rationals[c].denominator, ParamGroup::activation_coeffs, prefix + "denominator"});
    }
  }
  return params;
}

Tensor Model::forward(const GraphOperators& ops, const Tensor& features, Mode mode,
                      std::span<const Edge> edges, LayerTrace* trace) {
  Tensor h = features;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = std::visit(
        [&](const auto& layer) {
          using T = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<T, GcnLayer>) {
            return gcn_forward(layer, ops.gcn, h);
          } else {
            return sage_forward(layer, ops.mean, h);
          }
        },
        layers_[l]);
    if (l + 1 < layers_.size()) {
      switch (config_.activation) {
        case Activation::none:
          break;
        case Activation::relu:
          h = relu(h);
          break;
        case Activation::cna:
          h = cna_apply(h, cna_states_[l], mode, config_.cna.steps);
          break;
      }
    }
    if (trace != nullptr) {
      trace->dirichlet.push_back(dirichlet_energy(edges, h));
      double m = std::numeric_limits<double>::quiet_NaN();
      try {
        m = mad(edges, h);
      } catch (const ContractError&) {
      }
      trace->mad.push_back(m);
    }
  }
  return h;
}

Tensor model_forward(Model& model, const GraphBundle& bundle, Mode mode, LayerTrace* trace) {
  if (bundle.num_features != model.config().in_dim) {
    throw DimensionError("model_forward: bundle has " + std::to_string(bundle.num_features) +
                         " features but the model expects " + std::to_string(model.config().in_dim));
  }
  return model.forward(GraphOperators::from(bundle), bundle.features, mode, bundle.edges, trace);
}

std::size_t param_count(const Model& model) {
  std::size_t total = 0;
  for (const auto& p : model.parameters()) total += p.tensor.size();
  return total;
}

}  // namespace cnagnn
