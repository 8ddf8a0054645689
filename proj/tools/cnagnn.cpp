// Command-line front end: train, sweep-depth, ablate, gen-sbm, inspect.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cnagnn/errors.hpp"
#include "cnagnn/train.hpp"

namespace fs = std::filesystem;
using namespace cnagnn;

namespace {

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = s.find(sep, pos);
    parts.push_back(s.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return parts;
}

template <class T>
T parse_number(const std::string& text, const char* what) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && *first == ' ') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ContractError(std::string("cannot parse ") + what + " from '" + text + "'");
  }
  return value;
}

SbmParams parse_sbm(const std::string& text) {
  const auto f = split_list(text, ',');
  if (f.size() != 7) {
    throw ContractError("--sbm expects n,blocks,p_in,p_out,dim,sep,sigma (7 fields), got " +
                        std::to_string(f.size()));
  }
  SbmParams p;
  p.num_nodes = parse_number<std::size_t>(f[0], "n");
  p.num_blocks = parse_number<std::size_t>(f[1], "blocks");
  p.p_in = parse_number<double>(f[2], "p_in");
  p.p_out = parse_number<double>(f[3], "p_out");
  p.feature_dim = parse_number<std::size_t>(f[4], "dim");
  p.block_mean_separation = parse_number<double>(f[5], "sep");
  p.feature_noise_sigma = parse_number<double>(f[6], "sigma");
  return p;
}

SplitFractions parse_split(const std::string& text) {
  const auto f = split_list(text, ',');
  if (f.size() != 3) throw ContractError("--split expects three comma-separated fractions");
  return {parse_number<double>(f[0], "train fraction"), parse_number<double>(f[1], "val fraction"),
          parse_number<double>(f[2], "test fraction")};
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) return {parse_number<std::uint64_t>(text, "seed")};
  const auto lo = parse_number<std::uint64_t>(text.substr(0, dots), "first seed");
  const auto hi = parse_number<std::uint64_t>(text.substr(dots + 2), "last seed");
  if (hi < lo) throw ContractError("--seeds range is empty: " + text);
  std::vector<std::uint64_t> seeds;
  for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  return seeds;
}

// Raw flag values shared by the training subcommands.
struct Flags {
  std::string dataset;
  std::string sbm;
  std::string arch = "gcn";
  std::size_t layers = 2;
  std::size_t hidden = 16;
  std::string activation = "cna";
  std::size_t clusters = 4;
  std::size_t epochs = 200;
  double lr = 1e-3;
  double lr_act = 1e-5;
  double weight_decay = 5e-6;
  double eps = 1e-5;
  std::uint64_t seed = 0;
  std::string seeds;
  std::string split = "0.6,0.2,0.2";
  std::string task;
  std::string out = ".";
  std::string dump_clusters;
  std::string depths = "2,4,8,16,32";
  std::string subsets;
};

void add_data_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--dataset", f.dataset, "Bundle directory");
  cmd->add_option("--sbm", f.sbm, "Synthetic graph: n,blocks,p_in,p_out,dim,sep,sigma");
  cmd->add_option("--task", f.task, "classify or regress")->check(CLI::IsMember({"classify", "regress"}));
  cmd->add_option("--seed", f.seed, "Seed for data, split and model");
}

void add_train_flags(CLI::App* cmd, Flags& f) {
  add_data_flags(cmd, f);
  cmd->add_option("--arch", f.arch)->check(CLI::IsMember({"gcn", "sage"}));
  cmd->add_option("--layers", f.layers);
  cmd->add_option("--hidden", f.hidden);
  cmd->add_option("--activation", f.activation)->check(CLI::IsMember({"none", "relu", "cna"}));
  cmd->add_option("--clusters", f.clusters);
  cmd->add_option("--epochs", f.epochs);
  cmd->add_option("--lr", f.lr);
  cmd->add_option("--lr-act", f.lr_act);
  cmd->add_option("--weight-decay", f.weight_decay);
  cmd->add_option("--eps", f.eps);
  cmd->add_option("--seeds", f.seeds, "Seed range A..B");
  cmd->add_option("--split", f.split, "train,val,test fractions");
  cmd->add_option("--out", f.out, "Output directory");
}

TrainConfig to_config(const Flags& f) {
  TrainConfig c;
  if (f.dataset.empty() == f.sbm.empty()) {
    throw ContractError("exactly one of --dataset or --sbm is required");
  }
  if (!f.dataset.empty()) c.dataset = f.dataset;
  if (!f.sbm.empty()) c.sbm = parse_sbm(f.sbm);
  if (!f.task.empty()) c.task = f.task == "classify" ? TaskKind::classify : TaskKind::regress;
  c.arch = f.arch == "gcn" ? Arch::gcn : Arch::sage;
  c.num_layers = f.layers;
  c.hidden = f.hidden;
  c.activation = f.activation == "none" ? Activation::none
                 : f.activation == "relu" ? Activation::relu
                                          : Activation::cna;
  c.clusters = f.clusters;
  c.epochs = f.epochs;
  c.lr = f.lr;
  c.lr_act = f.lr_act;
  c.weight_decay = f.weight_decay;
  c.eps = f.eps;
  c.seed = f.seed;
  c.split = parse_split(f.split);
  if (!f.dump_clusters.empty()) c.dump_clusters = f.dump_clusters;
  c.validate();
  return c;
}

std::vector<std::uint64_t> seeds_of(const Flags& f) {
  return f.seeds.empty() ? std::vector<std::uint64_t>{f.seed} : parse_seeds(f.seeds);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path.string());
  return out;
}

int run_train(const Flags& f) {
  TrainConfig base = to_config(f);
  const auto seeds = seeds_of(f);
  int status = 0;
  for (std::uint64_t seed : seeds) {
    TrainConfig c = base;
    c.seed = seed;
    const fs::path dir = seeds.size() == 1 ? fs::path(f.out) : fs::path(f.out) / ("seed" + std::to_string(seed));
    if (c.dump_clusters) c.dump_clusters = dir / *c.dump_clusters;
    fs::create_directories(dir);
    const RunRecord r = train(c);
    open_out(dir / "run.json") << to_json(r).dump(2) << '\n';
    auto csv = open_out(dir / "metrics.csv");
    write_epoch_csv(csv, r);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    if (r.failed) {
      std::cerr << "seed " << seed << ": run failed: " << r.failure << '\n';
      status = 2;
      continue;
    }
    std::printf("seed %llu: best_epoch=%zu val_%s=%s test_%s=%s params=%zu\n",
                static_cast<unsigned long long>(seed), r.best_epoch, r.metric.c_str(),
                format_number(r.best_val_metric).c_str(), r.metric.c_str(),
                format_number(r.test_metric).c_str(), r.param_count);
  }
  return status;
}

int run_sweep(const Flags& f) {
  const TrainConfig base = to_config(f);
  std::vector<std::size_t> depths;
  for (const auto& d : split_list(f.depths, ',')) depths.push_back(parse_number<std::size_t>(d, "depth"));
  const auto seeds = seeds_of(f);
  const auto rows = depth_sweep(base, depths, seeds);
  fs::create_directories(f.out);
  auto csv = open_out(fs::path(f.out) / "sweep.csv");
  write_sweep_csv(csv, rows);
  std::size_t failures = 0;
  for (const auto& r : rows) {
    if (r.failed) {
      ++failures;
      std::cerr << "depth " << r.depth << ' ' << to_string(r.activation) << " seed " << r.seed
                << " failed: " << r.failure << '\n';
    }
  }
  std::printf("%zu runs, %zu failed\n", rows.size(), failures);
  return 0;
}

int run_ablate(const Flags& f) {
  const TrainConfig base = to_config(f);
  std::vector<CnaSteps> subsets;
  if (f.subsets.empty()) {
    subsets = all_step_subsets();
  } else {
    for (const auto& s : split_list(f.subsets, ',')) subsets.push_back(parse_steps(s));
  }
  const auto seeds = seeds_of(f);
  const auto rows = ablation_run(base, subsets, seeds);
  fs::create_directories(f.out);
  auto csv = open_out(fs::path(f.out) / "ablation.csv");
  write_ablation_csv(csv, rows, seeds);
  for (const auto& r : rows) {
    std::printf("%-6s %s +- %s (%zu failed)\n", steps_label(r.steps).c_str(),
                format_number(r.mean).c_str(), format_number(r.stddev).c_str(), r.failures);
  }
  return 0;
}

int run_gen_sbm(const Flags& f) {
  if (f.sbm.empty()) throw ContractError("gen-sbm requires --sbm");
  SbmParams p = parse_sbm(f.sbm);
  p.seed = f.seed;
  if (!f.task.empty()) p.task = f.task == "classify" ? TaskKind::classify : TaskKind::regress;
  const GraphBundle b = generate_sbm(p);
  write_bundle(b, f.out);
  std::printf("wrote %zu nodes, %zu edges to %s\n", b.num_nodes, b.edges.size(), f.out.c_str());
  return 0;
}

int run_inspect(const Flags& f) {
  if (f.dataset.empty()) throw ContractError("inspect requires --dataset");
  const GraphBundle b = load_bundle(f.dataset);
  std::printf("num_nodes=%zu\nnum_edges=%zu\nnum_features=%zu\ntask=%s\n", b.num_nodes,
              b.edges.size(), b.num_features, to_string(b.task));
  if (b.task == TaskKind::classify) {
    std::printf("num_classes=%zu\nhomophily=%s\n", b.num_classes,
                format_number(node_homophily(b)).c_str());
  }
  std::printf("splits=%s\n", b.splits.empty() ? "absent" : "present");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph neural networks with cluster-normalize-activate modules"};
  app.require_subcommand(1);
  Flags flags;

  auto* train_cmd = app.add_subcommand("train", "Train one model per seed");
  add_train_flags(train_cmd, flags);
  train_cmd->add_option("--dump-clusters", flags.dump_clusters,
                        "Write per-epoch cluster assignments and centroids under --out");

  auto* sweep_cmd = app.add_subcommand("sweep-depth", "Accuracy and Dirichlet energy versus depth");
  add_train_flags(sweep_cmd, flags);
  sweep_cmd->add_option("--depths", flags.depths, "Comma-separated depths");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train every subset of the CNA steps");
  add_train_flags(ablate_cmd, flags);
  ablate_cmd->add_option("--subsets", flags.subsets, "Comma-separated labels such as C+N+A,C+N,none");

  auto* gen_cmd = app.add_subcommand("gen-sbm", "Write a synthetic bundle");
  add_data_flags(gen_cmd, flags);
  gen_cmd->add_option("--out", flags.out, "Output directory")->required();

  auto* inspect_cmd = app.add_subcommand("inspect", "Print bundle statistics");
  inspect_cmd->add_option("--dataset", flags.dataset, "Bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) return run_train(flags);
    if (*sweep_cmd) return run_sweep(flags);
    if (*ablate_cmd) return run_ablate(flags);
    if (*gen_cmd) return run_gen_sbm(flags);
    if (*inspect_cmd) return run_inspect(flags);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    // Configuration, data and shape problems.
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
