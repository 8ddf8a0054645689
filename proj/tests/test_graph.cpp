#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "cnagnn/errors.hpp"
#include "cnagnn/graph.hpp"
#include "helpers.hpp"

using namespace cnagnn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("cnagnn_graph_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path path;
};

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

void write_triangle(const fs::path& dir, const std::string& edges, const std::string& labels = "0\n0\n1\n") {
  write_file(dir / "meta.json", R"({"num_nodes": 3, "num_features": 2, "task": "classify", "num_classes": 2})");
  write_file(dir / "edges.tsv", edges);
  write_file(dir / "features.tsv", "1\t0\n0\t1\n1\t1\n");
  write_file(dir / "labels.tsv", labels);
}

// Dense oracle for the normalized adjacency.
std::vector<double> dense_gcn(std::size_t n, const std::vector<Edge>& edges) {
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] = 1.0;
  for (const auto& e : edges) a[e.u * n + e.v] = a[e.v * n + e.u] = 1.0;
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a[i * n + j];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] /= std::sqrt(deg[i]) * std::sqrt(deg[j]);
  return a;
}

GraphBundle edges_only(std::size_t n, std::vector<Edge> edges) {
  GraphBundle b;
  b.num_nodes = n;
  b.num_features = 1;
  b.task = TaskKind::classify;
  b.num_classes = 1;
  b.features = Tensor::zeros(n, 1);
  b.labels.assign(n, 0);
  b.edges = canonical_edges(std::move(edges));
  return b;
}

}  // namespace

TEST_CASE("triangle bundle loads") {
  TempDir dir;
  write_triangle(dir.path, "0\t1\n1\t2\n0\t2\n");
  const GraphBundle b = load_bundle(dir.path);
  CHECK(b.num_nodes == 3);
  CHECK(b.edges.size() == 3);
  CHECK(b.features(2, 1) == 1.0);
  CHECK(b.splits.empty());
}

TEST_CASE("duplicate and reversed edges are merged") {
  TempDir dir;
  write_triangle(dir.path, "0\t1\n1\t0\n0\t1\n1 2\n\n");
  const GraphBundle b = load_bundle(dir.path);
  CHECK(b.edges == std::vector<Edge>{{0, 1}, {1, 2}});
}

TEST_CASE("self-loops in the edge file are dropped") {
  TempDir dir;
  write_triangle(dir.path, "0\t0\n0\t1\n");
  CHECK(load_bundle(dir.path).edges == std::vector<Edge>{{0, 1}});
}

TEST_CASE("out-of-range label is a validation error with its line") {
  TempDir dir;
  write_triangle(dir.path, "0\t1\n", "0\n7\n1\n");
  try {
    (void)load_bundle(dir.path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("out-of-range edge endpoint is a validation error") {
  TempDir dir;
  write_triangle(dir.path, "0\t1\n1\t3\n");
  try {
    (void)load_bundle(dir.path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("missing file is an ingestion error naming it") {
  TempDir dir;
  write_triangle(dir.path, "0\t1\n");
  fs::remove(dir.path / "features.tsv");
  try {
    (void)load_bundle(dir.path);
    FAIL("expected IngestionError");
  } catch (const IngestionError& e) {
    CHECK(std::string(e.what()).find("features.tsv") != std::string::npos);
  }
}

TEST_CASE("write then load round-trips exactly") {
  SbmParams p;
  p.num_nodes = 40;
  p.seed = 3;
  GraphBundle b = generate_sbm(p);
  b.splits = make_splits(b, {}, 3).tags;
  TempDir dir;
  write_bundle(b, dir.path);
  CHECK(load_bundle(dir.path) == b);

  p.task = TaskKind::regress;
  const GraphBundle r = generate_sbm(p);
  write_bundle(r, dir.path);
  const GraphBundle back = load_bundle(dir.path);
  CHECK(back == r);
  CHECK(back.splits.empty());
}

TEST_CASE("gcn normalization on small graphs") {
  SUBCASE("single edge") {
    const CsrMatrix m = gcn_normalize(edges_only(2, {{0, 1}}));
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(m.value(i, j) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("no edges gives the identity") {
    const CsrMatrix m = gcn_normalize(edges_only(4, {}));
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(m.value(i, j) == (i == j ? 1.0 : 0.0));
  }
  SUBCASE("triangle") {
    const CsrMatrix m = gcn_normalize(testing::triangle());
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(m.value(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("gcn normalization matches the dense oracle and is exactly symmetric") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GraphBundle b = testing::random_graph(15, 2, 3, 0.3, seed);
    const CsrMatrix m = gcn_normalize(b);
    const auto dense = dense_gcn(b.num_nodes, b.edges);
    for (std::size_t i = 0; i < b.num_nodes; ++i) {
      for (std::size_t j = 0; j < b.num_nodes; ++j) {
        CHECK(m.value(i, j) == doctest::Approx(dense[i * b.num_nodes + j]).epsilon(1e-14));
        CHECK(m.value(i, j) == m.value(j, i));
      }
      for (std::size_t p = m.offsets[i] + 1; p < m.offsets[i + 1]; ++p) CHECK(m.indices[p - 1] < m.indices[p]);
    }
    CHECK(m.is_symmetric());
  }
}

TEST_CASE("gcn structure depends only on the edge set") {
  const GraphBundle b = testing::random_graph(12, 2, 3, 0.3, 9);
  GraphBundle shuffled = b;
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.edges.begin(), shuffled.edges.end(), rng);
  for (auto& e : shuffled.edges) std::swap(e.u, e.v);
  shuffled.edges = canonical_edges(shuffled.edges);
  CHECK(gcn_normalize(shuffled) == gcn_normalize(b));
}

TEST_CASE("mean aggregator rows average the neighbours") {
  const CsrMatrix m = mean_aggregator(edges_only(3, {{0, 1}, {0, 2}}));
  CHECK(m.value(0, 1) == 0.5);
  CHECK(m.value(0, 2) == 0.5);
  CHECK(m.value(1, 0) == 1.0);
  CHECK(m.value(0, 0) == 0.0);
}

TEST_CASE("node homophily") {
  GraphBundle t = testing::triangle();
  CHECK(node_homophily(t) == doctest::Approx(1.0 / 3.0));
  t.labels = {1, 1, 1};
  CHECK(node_homophily(t) == 1.0);

  GraphBundle pair = edges_only(3, {{0, 1}});
  pair.num_classes = 2;
  pair.labels = {0, 1, 1};  // node 2 is isolated and ignored
  CHECK(node_homophily(pair) == 0.0);

  GraphBundle reg = generate_sbm({.num_nodes = 8, .num_blocks = 2, .task = TaskKind::regress});
  CHECK_THROWS_AS((void)node_homophily(reg), ContractError);
}

TEST_CASE("homophily is invariant to relabelling classes") {
  const GraphBundle b = testing::random_graph(30, 2, 3, 0.2, 4);
  GraphBundle relabelled = b;
  const int perm[] = {2, 0, 1};
  for (int& l : relabelled.labels) l = perm[l];
  CHECK(node_homophily(relabelled) == node_homophily(b));
}

TEST_CASE("SBM with p_in = 1 and p_out = 0 gives disjoint cliques") {
  SbmParams p;
  p.num_nodes = 6;
  p.num_blocks = 2;
  p.p_in = 1.0;
  p.p_out = 0.0;
  p.feature_dim = 2;
  const GraphBundle b = generate_sbm(p);
  CHECK(b.edges == std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}});
  CHECK(b.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("SBM with p_in = p_out has homophily near 1/blocks") {
  SbmParams p;
  p.num_nodes = 200;
  p.num_blocks = 4;
  p.p_in = p.p_out = 0.05;
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    p.seed = seed;
    total += node_homophily(generate_sbm(p));
  }
  // Same-block neighbours: 49 of 199 possible partners.
  CHECK(std::fabs(total / 100.0 - 0.25) < 0.05);
}

TEST_CASE("SBM is deterministic under its seed and features follow the block means") {
  SbmParams p;
  p.seed = 11;
  const GraphBundle a = generate_sbm(p);
  CHECK(a == generate_sbm(p));
  p.seed = 12;
  CHECK_FALSE(a == generate_sbm(p));

  // Block b's mean sits at separation * e_b.
  std::vector<double> mean(p.feature_dim * p.num_blocks, 0.0);
  const std::size_t per = p.num_nodes / p.num_blocks;
  for (std::size_t i = 0; i < p.num_nodes; ++i)
    for (std::size_t j = 0; j < p.feature_dim; ++j) mean[a.labels[i] * p.feature_dim + j] += a.features(i, j) / per;
  for (std::size_t b = 0; b < p.num_blocks; ++b)
    for (std::size_t j = 0; j < p.feature_dim; ++j)
      CHECK(std::fabs(mean[b * p.feature_dim + j] - (j == b ? 3.0 : 0.0)) < 0.5);
}

TEST_CASE("SBM regression targets span five decades") {
  SbmParams p;
  p.task = TaskKind::regress;
  const GraphBundle b = generate_sbm(p);
  const std::size_t per = p.num_nodes / p.num_blocks;
  CHECK(std::fabs(b.targets[0] - 1e-5) < 5e-3);
  CHECK(std::fabs(b.targets[p.num_nodes - 1] - 1.0) < 5e-3);
  CHECK(b.targets.size() == p.num_nodes);
  (void)per;
}

TEST_CASE("stratified splits") {
  GraphBundle b = edges_only(10, {});
  b.num_classes = 2;
  b.labels = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  const SplitResult r = make_splits(b, {0.6, 0.2, 0.2}, 5);
  CHECK(r.warnings.empty());
  std::size_t counts[2][3] = {};
  for (std::size_t i = 0; i < 10; ++i) ++counts[b.labels[i]][static_cast<int>(r.tags[i])];
  for (auto& c : counts) {
    CHECK(c[0] == 3);
    CHECK(c[1] == 1);
    CHECK(c[2] == 1);
  }
  CHECK(make_splits(b, {0.6, 0.2, 0.2}, 5).tags == r.tags);
  CHECK_THROWS_AS((void)make_splits(b, {0.6, 0.2, 0.1}, 5), ContractError);
}

TEST_CASE("tiny classes fall back to an unstratified split with a warning") {
  GraphBundle b = edges_only(10, {});
  b.num_classes = 2;
  b.labels = {0, 0, 0, 0, 0, 0, 0, 0, 0, 1};
  const SplitResult r = make_splits(b, {0.6, 0.2, 0.2}, 1);
  CHECK_FALSE(r.warnings.empty());
  CHECK(std::count(r.tags.begin(), r.tags.end(), Split::train) == 6);
}

TEST_CASE("permuting nodes relabels edges, features and labels") {
  const GraphBundle b = testing::random_graph(6, 2, 2, 0.5, 2);
  std::vector<std::size_t> perm{3, 5, 0, 1, 4, 2};
  const GraphBundle p = permute_nodes(b, perm);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(p.labels[perm[i]] == b.labels[i]);
    CHECK(p.features(perm[i], 1) == b.features(i, 1));
  }
  CHECK(p.edges.size() == b.edges.size());
  CHECK(node_homophily(p) == doctest::Approx(node_homophily(b)).epsilon(1e-15));
}
