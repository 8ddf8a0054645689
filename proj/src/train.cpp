#include "cnagnn/train.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "cnagnn/errors.hpp"
#include "cnagnn/metrics.hpp"
#include "cnagnn/optim.hpp"

namespace cnagnn {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

void TrainConfig::validate() const {
  if (dataset.has_value() == sbm.has_value()) {
    throw ContractError("config: specify exactly one of a dataset directory or an SBM");
  }
  if (!(lr > 0.0) || !(lr_act > 0.0)) throw ContractError("config: learning rates must be positive");
  if (!(weight_decay >= 0.0)) throw ContractError("config: weight decay must be non-negative");
  if (epochs < 1) throw ContractError("config: epochs must be at least 1");
  if (num_layers < 1) throw ContractError("config: need at least one layer");
  if (hidden < 1) throw ContractError("config: hidden width must be positive");
  if (activation == Activation::cna && clusters < 1) throw ContractError("config: clusters must be positive");
  if (!(eps > 0.0)) throw ContractError("config: eps must be positive");
  if (sbm) sbm->validate();
}

json to_json(const TrainConfig& c) {
  json j;
  if (c.dataset) j["dataset"] = c.dataset->string();
  if (c.sbm) {
    j["sbm"] = {{"num_nodes", c.sbm->num_nodes},
                {"num_blocks", c.sbm->num_blocks},
                {"p_in", c.sbm->p_in},
                {"p_out", c.sbm->p_out},
                {"feature_dim", c.sbm->feature_dim},
                {"block_mean_separation", c.sbm->block_mean_separation},
                {"feature_noise_sigma", c.sbm->feature_noise_sigma}};
  }
  if (c.task) j["task"] = to_string(*c.task);
  j["arch"] = to_string(c.arch);
  j["layers"] = c.num_layers;
  j["hidden"] = c.hidden;
  j["activation"] = to_string(c.activation);
  j["clusters"] = c.clusters;
  j["cna_steps"] = steps_label(c.cna_steps);
  j["warm_start"] = c.warm_start;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["lr_act"] = c.lr_act;
  j["weight_decay"] = c.weight_decay;
  j["eps"] = c.eps;
  j["seed"] = c.seed;
  j["split"] = {c.split.train, c.split.val, c.split.test};
  return j;
}

double RunRecord::output_dirichlet() const {
  return final_dirichlet.empty() ? std::numeric_limits<double>::quiet_NaN() : final_dirichlet.back();
}

json to_json(const RunRecord& r) {
  auto nan_safe = [](double v) -> json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", nan_safe(e.train_loss)},
                      {"val_loss", nan_safe(e.val_loss)},
                      {"train_metric", nan_safe(e.train_metric)},
                      {"val_metric", nan_safe(e.val_metric)},
                      {"test_metric", nan_safe(e.test_metric)}});
  }
  json dirichlet = json::array();
  for (double v : r.final_dirichlet) dirichlet.push_back(nan_safe(v));
  json mad_values = json::array();
  for (double v : r.final_mad) mad_values.push_back(nan_safe(v));
  return {{"config", to_json(r.config)},
          {"metric", r.metric},
          {"selection_rule", r.selection_rule},
          {"epochs", epochs},
          {"best_epoch", r.best_epoch},
          {"best_val_metric", nan_safe(r.best_val_metric)},
          {"test_metric", nan_safe(r.test_metric)},
          {"final_dirichlet", dirichlet},
          {"final_mad", mad_values},
          {"param_count", r.param_count},
          {"wall_clock_seconds", r.wall_clock_seconds},
          {"failed", r.failed},
          {"failure", r.failure},
          {"warnings", r.warnings}};
}

GraphBundle load_data(const TrainConfig& config) {
  config.validate();
  if (config.dataset) {
    GraphBundle b = load_bundle(*config.dataset);
    if (config.task && *config.task != b.task) {
      throw ContractError(std::string("config: requested task ") + to_string(*config.task) +
                          " but the bundle is " + to_string(b.task));
    }
    return b;
  }
  SbmParams p = *config.sbm;
  p.seed = config.seed;
  if (config.task) p.task = *config.task;
  return generate_sbm(p);
}

namespace {

void dump_cluster_state(const fs::path& dir, const Model& model, std::size_t epoch) {
  fs::create_directories(dir);
  const auto& states = model.cna_states();
  for (std::size_t l = 0; l < states.size(); ++l) {
    const auto& km = states[l].kmeans;
    const std::string stem = "layer" + std::to_string(l) + "_epoch" + std::to_string(epoch);
    std::ofstream assign(dir / (stem + "_assignments.tsv"));
    for (int a : km.assignments) assign << a << '\n';
    std::ofstream cent(dir / (stem + "_centroids.tsv"));
    for (std::size_t c = 0; c < km.k; ++c) {
      for (std::size_t j = 0; j < km.dim; ++j) {
        if (j > 0) cent << '\t';
        cent << format_number(km.centroids[c * km.dim + j]);
      }
      cent << '\n';
    }
  }
}

struct Masks {
  Mask train;
  Mask val;
  Mask test;
};

Masks masks_from(const std::vector<Split>& tags) {
  Masks m;
  for (Split s : tags) {
    m.train.push_back(s == Split::train);
    m.val.push_back(s == Split::val);
    m.test.push_back(s == Split::test);
  }
  return m;
}

}  // namespace

RunRecord train(const TrainConfig& config) { return train(config, load_data(config)); }

RunRecord train(const TrainConfig& config, const GraphBundle& bundle) {
  config.validate();
  bundle.validate();
  const auto start = std::chrono::steady_clock::now();

  RunRecord record;
  record.config = config;
  const bool classify = bundle.task == TaskKind::classify;
  record.metric = classify ? "accuracy" : "nmse";

  std::vector<Split> tags = bundle.splits;
  if (tags.empty()) {
    SplitResult split = make_splits(bundle, config.split, config.seed);
    tags = std::move(split.tags);
    record.warnings = std::move(split.warnings);
  }
  const Masks masks = masks_from(tags);

  ModelConfig mc;
  mc.arch = config.arch;
  mc.num_layers = config.num_layers;
  mc.in_dim = bundle.num_features;
  mc.hidden = config.hidden;
  mc.out_dim = classify ? bundle.num_classes : 1;
  mc.activation = config.activation;
  mc.cna.k = config.clusters;
  mc.cna.eps = config.eps;
  mc.cna.warm_start = config.warm_start;
  mc.cna.steps = config.cna_steps;
  Model model(mc, config.seed);
  record.param_count = param_count(model);

  const GraphOperators ops = GraphOperators::from(bundle);
  std::vector<Parameter> params = model.parameters();
  AdamState adam;
  AdamOptions opts;
  opts.lr = config.lr;
  opts.lr_act = config.lr_act;
  opts.weight_decay = config.weight_decay;

  auto loss_of = [&](const Tensor& out, const Mask& mask) {
    return classify ? cross_entropy_loss(out, bundle.labels, mask)
                    : mse_loss(out, bundle.targets, mask);
  };
  auto metric_of = [&](const Tensor& out, const Mask& mask) {
    return classify ? accuracy(out, bundle.labels, mask) : nmse(out, bundle.targets, mask);
  };
  auto better = [classify](double candidate, double incumbent) {
    return classify ? candidate > incumbent : candidate < incumbent;
  };

  record.best_val_metric = classify ? -std::numeric_limits<double>::infinity()
                                    : std::numeric_limits<double>::infinity();
  try {
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      zero_grad(params);
      EpochRecord er;
      er.epoch = epoch;
      {
        const Tensor out = model.forward(ops, bundle.features, Mode::train);
        const Tensor loss = loss_of(out, masks.train);
        er.train_loss = loss.item();
        backward(loss);
      }
      adam_step(params, adam, opts);
      if (config.dump_clusters) dump_cluster_state(*config.dump_clusters, model, epoch);

      const bool last = epoch + 1 == config.epochs;
      LayerTrace trace;
      const Tensor out = model.forward(ops, bundle.features, Mode::eval, bundle.edges,
                                       last ? &trace : nullptr);
      er.val_loss = loss_of(out, masks.val).item();
      er.train_metric = metric_of(out, masks.train);
      er.val_metric = metric_of(out, masks.val);
      er.test_metric = metric_of(out, masks.test);
      if (better(er.val_metric, record.best_val_metric)) {
        record.best_val_metric = er.val_metric;
        record.best_epoch = epoch;
        record.test_metric = er.test_metric;
      }
      if (last) {
        record.final_dirichlet = std::move(trace.dirichlet);
        record.final_mad = std::move(trace.mad);
      }
      record.epochs.push_back(er);
    }
  } catch (const NumericError& e) {
    record.failed = true;
    record.failure = e.what();
  }
  record.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

void write_epoch_csv(std::ostream& out, const RunRecord& record) {
  out << "epoch,train_loss,val_loss,train_" << record.metric << ",val_" << record.metric
      << ",test_" << record.metric << "\r\n";
  for (const auto& e : record.epochs) {
    out << e.epoch << ',' << format_number(e.train_loss) << ',' << format_number(e.val_loss) << ','
        << format_number(e.train_metric) << ',' << format_number(e.val_metric) << ','
        << format_number(e.test_metric) << "\r\n";
  }
}

}  // namespace cnagnn
