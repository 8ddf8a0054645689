#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cnagnn/errors.hpp"
#include "cnagnn/train.hpp"

using namespace cnagnn;

namespace {

TrainConfig small_sbm(std::size_t epochs = 20) {
  TrainConfig c;
  SbmParams p;
  p.num_nodes = 80;
  c.sbm = p;
  c.epochs = epochs;
  c.hidden = 8;
  return c;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char ch : s) n += ch == '\n';
  return n;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig c = small_sbm();
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = small_sbm();
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = small_sbm();
  c.lr_act = -1.0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = small_sbm();
  c.weight_decay = -1e-3;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = small_sbm();
  c.sbm.reset();
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = small_sbm();
  c.dataset = "somewhere";
  CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("training records every epoch and is deterministic") {
  for (Activation act : {Activation::relu, Activation::cna}) {
    TrainConfig c = small_sbm();
    c.activation = act;
    c.seed = 3;
    const RunRecord a = train(c);
    const RunRecord b = train(c);
    CHECK_FALSE(a.failed);
    CHECK(a.epochs.size() == c.epochs);
    CHECK(a.final_dirichlet.size() == c.num_layers);
    std::ostringstream sa, sb;
    write_epoch_csv(sa, a);
    write_epoch_csv(sb, b);
    CHECK(sa.str() == sb.str());
    CHECK(count_lines(sa.str()) == c.epochs + 1);
    for (const auto& e : a.epochs) CHECK(std::isfinite(e.train_loss));
    CHECK(a.test_metric == a.epochs[a.best_epoch].test_metric);
  }
}

TEST_CASE("best epoch has the best validation metric, earliest on ties") {
  const RunRecord r = train(small_sbm(30));
  for (std::size_t e = 0; e < r.epochs.size(); ++e) {
    if (e < r.best_epoch) CHECK(r.epochs[e].val_metric < r.best_val_metric);
    if (e > r.best_epoch) CHECK(r.epochs[e].val_metric <= r.best_val_metric);
  }
}

TEST_CASE("regression runs report nmse") {
  TrainConfig c = small_sbm();
  c.task = TaskKind::regress;
  const RunRecord r = train(c);
  CHECK(r.metric == "nmse");
  CHECK(std::isfinite(r.test_metric));
}

TEST_CASE("a bundle of the wrong task is rejected") {
  TrainConfig c = small_sbm();
  const auto dir = std::filesystem::temp_directory_path() / "cnagnn_train_task_check";
  write_bundle(generate_sbm(*c.sbm), dir);
  c.sbm.reset();
  c.dataset = dir;
  CHECK(load_data(c).task == TaskKind::classify);
  c.task = TaskKind::regress;
  CHECK_THROWS_AS((void)load_data(c), ContractError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run record JSON carries the documented fields") {
  const RunRecord r = train(small_sbm(5));
  const auto j = to_json(r);
  for (const char* key : {"config", "epochs", "best_epoch", "test_metric", "final_dirichlet",
                          "wall_clock_seconds", "param_count", "selection_rule", "failed"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["epochs"].size() == 5);
  CHECK(j["config"]["lr_act"] == 1e-5);
}

TEST_CASE("depth sweep shapes") {
  TrainConfig c = small_sbm(3);
  const std::size_t depths[] = {2};
  const std::uint64_t seeds[] = {0, 1};
  const auto rows = depth_sweep(c, depths, seeds);
  CHECK(rows.size() == 1 * 3 * 2);
  std::ostringstream out;
  write_sweep_csv(out, rows);
  CHECK(count_lines(out.str()) == rows.size() + 1);
  CHECK(out.str().find("\r\n") != std::string::npos);
  CHECK_THROWS_AS((void)depth_sweep(c, std::span<const std::size_t>{}, seeds), ContractError);
}

TEST_CASE("step subset labels round-trip") {
  const auto subsets = all_step_subsets();
  CHECK(subsets.size() == 8);
  for (const auto& s : subsets) CHECK(parse_steps(steps_label(s)) == s);
  CHECK(steps_label(CnaSteps::all()) == "C+N+A");
  CHECK(steps_label(CnaSteps::none()) == "none");
  CHECK_THROWS_AS((void)parse_steps("C+X"), ContractError);
  CHECK_THROWS_AS((void)parse_steps("C+C"), ContractError);
}

TEST_CASE("ablation yields one row per subset and the empty subset equals no activation") {
  TrainConfig c = small_sbm(10);
  c.num_layers = 3;
  const std::uint64_t seeds[] = {0, 1};
  const auto subsets = all_step_subsets();
  const auto rows = ablation_run(c, subsets, seeds);
  CHECK(rows.size() == 8);
  const AblationRow& empty = rows.back();
  REQUIRE(empty.steps == CnaSteps::none());
  for (std::size_t k = 0; k < 2; ++k) {
    TrainConfig none = c;
    none.activation = Activation::none;
    none.seed = seeds[k];
    CHECK(empty.per_seed[k] == train(none).test_metric);
  }
  std::ostringstream out;
  write_ablation_csv(out, rows, seeds);
  CHECK(count_lines(out.str()) == 9);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) {
    CHECK(std::stod(format_number(v)) == v);
  }
  CHECK(format_number(std::nan("")) == "nan");
}

namespace {

// Softmax regression on raw features, no graph, plain gradient descent.
double logistic_regression_accuracy(const GraphBundle& b, const std::vector<Split>& tags) {
  const std::size_t n = b.num_nodes, d = b.num_features, c = b.num_classes;
  std::vector<double> w((d + 1) * c, 0.0), g(w.size()), p(c);
  auto logits = [&](std::size_t i) {
    for (std::size_t k = 0; k < c; ++k) {
      double z = w[d * c + k];
      for (std::size_t j = 0; j < d; ++j) z += b.features(i, j) * w[j * c + k];
      p[k] = z;
    }
  };
  std::size_t train_count = 0;
  for (Split s : tags) train_count += s == Split::train;
  for (int it = 0; it < 500; ++it) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (tags[i] != Split::train) continue;
      logits(i);
      const double mx = *std::max_element(p.begin(), p.end());
      double z = 0.0;
      for (double& v : p) z += (v = std::exp(v - mx));
      for (std::size_t k = 0; k < c; ++k) {
        const double r = p[k] / z - (static_cast<int>(k) == b.labels[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < d; ++j) g[j * c + k] += r * b.features(i, j);
        g[d * c + k] += r;
      }
    }
    for (std::size_t q = 0; q < w.size(); ++q) w[q] -= 0.1 * g[q] / static_cast<double>(train_count);
  }
  std::size_t right = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tags[i] != Split::test) continue;
    logits(i);
    right += static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()) == b.labels[i];
    ++total;
  }
  return static_cast<double>(right) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("two-layer gcn with cna separates the default sbm") {
  TrainConfig c;
  c.sbm = SbmParams{};
  c.num_layers = 2;
  c.clusters = 4;
  c.epochs = 200;
  c.lr = 1e-2;
  c.lr_act = 1.0;
  const GraphBundle b = load_data(c);
  const double oracle = logistic_regression_accuracy(b, make_splits(b, c.split, c.seed).tags);
  CHECK(oracle >= 0.85);
  const RunRecord r = train(c, b);
  CHECK_FALSE(r.failed);
  CHECK(r.test_metric > 0.9);
  MESSAGE("feature-only oracle " << oracle << ", gcn+cna " << r.test_metric);
}
