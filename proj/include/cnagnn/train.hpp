#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cnagnn/graph.hpp"
#include "cnagnn/layers.hpp"

namespace cnagnn {

struct TrainConfig {
  /// Exactly one data source: a bundle directory or an SBM specification.
  /// The SBM is generated with `seed`, overriding `sbm->seed`.
  std::optional<std::filesystem::path> dataset;
  std::optional<SbmParams> sbm;
  /// Requested task. For SBM data it selects the generator variant; for a
  /// bundle it must match the bundle's task.
  std::optional<TaskKind> task;

  Arch arch = Arch::gcn;
  std::size_t num_layers = 2;
  std::size_t hidden = 16;
  Activation activation = Activation::cna;
  std::size_t clusters = 4;
  CnaSteps cna_steps = CnaSteps::all();
  bool warm_start = true;

  std::size_t epochs = 200;
  double lr = 1e-3;
  double lr_act = 1e-5;
  double weight_decay = 5e-6;
  double eps = 1e-5;
  std::uint64_t seed = 0;
  SplitFractions split;

  /// When set, every epoch's cluster assignments and centroids are written here as TSV.
  std::optional<std::filesystem::path> dump_clusters;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_metric = 0.0;
  double val_metric = 0.0;
  double test_metric = 0.0;
};

struct RunRecord {
  TrainConfig config;
  std::string metric;  // "accuracy" or "nmse"
  std::string selection_rule = "best validation metric, earliest epoch on ties";
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_metric = 0.0;
  /// Test metric of the epoch with the best validation metric.
  double test_metric = 0.0;
  /// Per-layer statistics of the final epoch's evaluation pass.
  std::vector<double> final_dirichlet;
  std::vector<double> final_mad;
  std::size_t param_count = 0;
  double wall_clock_seconds = 0.0;
  bool failed = false;
  std::string failure;
  std::vector<std::string> warnings;

  /// Dirichlet energy of the model output at the final epoch (NaN if unavailable).
  double output_dirichlet() const;
};

nlohmann::json to_json(const RunRecord& record);

/// Loads or generates the data a config describes.
GraphBundle load_data(const TrainConfig& config);

/// Full-batch transductive training with Adam. Numeric divergence marks the
/// record failed instead of throwing; configuration and data errors throw.
RunRecord train(const TrainConfig& config);
RunRecord train(const TrainConfig& config, const GraphBundle& bundle);

/// Per-epoch metrics as CSV (header + one row per epoch).
void write_epoch_csv(std::ostream& out, const RunRecord& record);

struct SweepRow {
  std::size_t depth = 0;
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;
  double test_metric = 0.0;
  double final_dirichlet = 0.0;
  bool failed = false;
  std::string failure;
};

inline constexpr Activation kSweepActivations[] = {Activation::relu, Activation::none,
                                                   Activation::cna};

/// Trains every (depth, activation, seed) combination of `base`. Runs may
/// execute in parallel; rows come back sorted by (depth, activation, seed).
/// A failing run yields a failed row and the sweep continues.
std::vector<SweepRow> depth_sweep(const TrainConfig& base, std::span<const std::size_t> depths,
                                  std::span<const std::uint64_t> seeds,
                                  std::span<const Activation> activations = kSweepActivations);

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

struct AblationRow {
  CnaSteps steps;
  std::vector<double> per_seed;  // test metric per seed, NaN for failed runs
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  std::size_t failures = 0;
};

/// "C+N+A" style label; "none" for the empty subset.
std::string steps_label(CnaSteps steps);
/// Parses a label produced by `steps_label`.
CnaSteps parse_steps(const std::string& label);
/// The eight subsets of {Cluster, Normalize, Activate}.
std::vector<CnaSteps> all_step_subsets();

/// Trains `base` with activation CNA once per subset and seed.
std::vector<AblationRow> ablation_run(const TrainConfig& base, std::span<const CnaSteps> subsets,
                                      std::span<const std::uint64_t> seeds);

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows,
                        std::span<const std::uint64_t> seeds);

/// Shortest round-trip decimal form used by every CSV and TSV writer.
std::string format_number(double value);

}  // namespace cnagnn
