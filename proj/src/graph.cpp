#include "cnagnn/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cnagnn/errors.hpp"

namespace cnagnn {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* to_string(TaskKind task) { return task == TaskKind::classify ? "classify" : "regress"; }

const char* to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

std::vector<Edge> canonical_edges(std::vector<Edge> edges) {
  std::erase_if(edges, [](const Edge& e) { return e.u == e.v; });
  for (auto& e : edges) {
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

void GraphBundle::validate() const {
  if (!features.defined() || features.rows() != num_nodes || features.cols() != num_features) {
    throw ContractError("bundle: feature matrix does not match num_nodes x num_features");
  }
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    if (e.u >= e.v || e.v >= num_nodes) {
      throw ContractError("bundle: edge " + std::to_string(i) + " is not a canonical pair below num_nodes");
    }
    if (i > 0 && !(edges[i - 1] < e)) throw ContractError("bundle: edges not sorted and unique");
  }
  if (task == TaskKind::classify) {
    if (labels.size() != num_nodes) throw ContractError("bundle: label count differs from num_nodes");
    for (int y : labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
        throw ContractError("bundle: label outside [0, num_classes)");
      }
    }
  } else if (targets.size() != num_nodes) {
    throw ContractError("bundle: target count differs from num_nodes");
  }
  if (!splits.empty()) {
    if (splits.size() != num_nodes) throw ContractError("bundle: split count differs from num_nodes");
    for (Split s : {Split::train, Split::val, Split::test}) {
      if (std::find(splits.begin(), splits.end(), s) == splits.end()) {
        throw ContractError(std::string("bundle: split '") + to_string(s) + "' is empty");
      }
    }
  }
}

bool operator==(const GraphBundle& a, const GraphBundle& b) {
  const bool same_features =
      a.features.defined() == b.features.defined() &&
      (!a.features.defined() ||
       (a.features.shape() == b.features.shape() &&
        std::equal(a.features.values().begin(), a.features.values().end(),
                   b.features.values().begin())));
  return a.num_nodes == b.num_nodes && a.num_features == b.num_features && a.task == b.task &&
         a.num_classes == b.num_classes && same_features && a.edges == b.edges &&
         a.labels == b.labels && a.targets == b.targets && a.splits == b.splits;
}

namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  return in;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == '\t' || line[pos] == ' ')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != '\t' && line[end] != ' ') ++end;
    out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

/// Non-blank lines of a file with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> read_lines(const fs::path& path) {
  auto in = open_input(path);
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.emplace_back(number, line);
  }
  return lines;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

GraphBundle load_bundle(const fs::path& dir) {
  GraphBundle b;
  const fs::path meta_path = dir / "meta.json";
  {
    auto in = open_input(meta_path);
    json meta;
    try {
      in >> meta;
      b.num_nodes = meta.at("num_nodes").get<std::size_t>();
      b.num_features = meta.at("num_features").get<std::size_t>();
      const auto task = meta.at("task").get<std::string>();
      if (task == "classify") {
        b.task = TaskKind::classify;
        b.num_classes = meta.at("num_classes").get<std::size_t>();
      } else if (task == "regress") {
        b.task = TaskKind::regress;
      } else {
        throw ValidationError(meta_path.string(), 1, "unknown task '" + task + "'");
      }
    } catch (const json::exception& e) {
      throw ValidationError(meta_path.string(), 1, e.what());
    }
  }

  const fs::path edges_path = dir / "edges.tsv";
  for (const auto& [number, line] : read_lines(edges_path)) {
    const auto fields = split_fields(line);
    Edge e;
    if (fields.size() != 2 || !parse_number(fields[0], e.u) || !parse_number(fields[1], e.v)) {
      throw ValidationError(edges_path.string(), number, "expected two node indices");
    }
    if (e.u >= b.num_nodes || e.v >= b.num_nodes) {
      throw ValidationError(edges_path.string(), number, "node index out of range");
    }
    b.edges.push_back(e);
  }
  b.edges = canonical_edges(std::move(b.edges));

  const fs::path features_path = dir / "features.tsv";
  {
    const auto lines = read_lines(features_path);
    if (lines.size() != b.num_nodes) {
      throw ValidationError(features_path.string(), lines.size(),
                            "expected " + std::to_string(b.num_nodes) + " rows, found " +
                                std::to_string(lines.size()));
    }
    std::vector<double> values;
    values.reserve(b.num_nodes * b.num_features);
    for (const auto& [number, line] : lines) {
      const auto fields = split_fields(line);
      if (fields.size() != b.num_features) {
        throw ValidationError(features_path.string(), number,
                              "expected " + std::to_string(b.num_features) + " values");
      }
      for (auto f : fields) {
        double v = 0.0;
        if (!parse_number(f, v) || !std::isfinite(v)) {
          throw ValidationError(features_path.string(), number, "bad feature value");
        }
        values.push_back(v);
      }
    }
    b.features = Tensor::from(b.num_nodes, b.num_features, std::move(values));
  }

  const fs::path labels_path = dir / "labels.tsv";
  {
    const auto lines = read_lines(labels_path);
    if (lines.size() != b.num_nodes) {
      throw ValidationError(labels_path.string(), lines.size(),
                            "expected " + std::to_string(b.num_nodes) + " labels");
    }
    for (const auto& [number, line] : lines) {
      const auto fields = split_fields(line);
      if (fields.size() != 1) throw ValidationError(labels_path.string(), number, "expected one value");
      if (b.task == TaskKind::classify) {
        int y = 0;
        if (!parse_number(fields[0], y)) {
          throw ValidationError(labels_path.string(), number, "label is not an integer");
        }
        if (y < 0 || static_cast<std::size_t>(y) >= b.num_classes) {
          throw ValidationError(labels_path.string(), number,
                                "label " + std::to_string(y) + " outside [0, " +
                                    std::to_string(b.num_classes) + ")");
        }
        b.labels.push_back(y);
      } else {
        double t = 0.0;
        if (!parse_number(fields[0], t) || !std::isfinite(t)) {
          throw ValidationError(labels_path.string(), number, "bad target value");
        }
        b.targets.push_back(t);
      }
    }
  }

  const fs::path splits_path = dir / "splits.tsv";
  if (fs::exists(splits_path)) {
    const auto lines = read_lines(splits_path);
    if (lines.size() != b.num_nodes) {
      throw ValidationError(splits_path.string(), lines.size(),
                            "expected " + std::to_string(b.num_nodes) + " split tags");
    }
    for (const auto& [number, line] : lines) {
      const auto fields = split_fields(line);
      if (fields.size() != 1) throw ValidationError(splits_path.string(), number, "expected one tag");
      if (fields[0] == "train") {
        b.splits.push_back(Split::train);
      } else if (fields[0] == "val") {
        b.splits.push_back(Split::val);
      } else if (fields[0] == "test") {
        b.splits.push_back(Split::test);
      } else {
        throw ValidationError(splits_path.string(), number, "unknown split tag");
      }
    }
    for (Split s : {Split::train, Split::val, Split::test}) {
      if (std::find(b.splits.begin(), b.splits.end(), s) == b.splits.end()) {
        throw ValidationError(splits_path.string(), lines.size(),
                              std::string("no node tagged '") + to_string(s) + "'");
      }
    }
  }
  return b;
}

void write_bundle(const GraphBundle& bundle, const fs::path& dir) {
  bundle.validate();
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw IngestionError("cannot write " + (dir / name).string());
    return out;
  };

  json meta = {{"num_nodes", bundle.num_nodes},
               {"num_features", bundle.num_features},
               {"task", to_string(bundle.task)}};
  if (bundle.task == TaskKind::classify) meta["num_classes"] = bundle.num_classes;
  open("meta.json") << meta.dump(2) << '\n';

  {
    auto out = open("edges.tsv");
    for (const auto& e : bundle.edges) out << e.u << '\t' << e.v << '\n';
  }
  {
    auto out = open("features.tsv");
    const auto v = bundle.features.values();
    for (std::size_t i = 0; i < bundle.num_nodes; ++i) {
      for (std::size_t j = 0; j < bundle.num_features; ++j) {
        if (j > 0) out << '\t';
        out << format_double(v[i * bundle.num_features + j]);
      }
      out << '\n';
    }
  }
  {
    auto out = open("labels.tsv");
    if (bundle.task == TaskKind::classify) {
      for (int y : bundle.labels) out << y << '\n';
    } else {
      for (double t : bundle.targets) out << format_double(t) << '\n';
    }
  }
  if (!bundle.splits.empty()) {
    auto out = open("splits.tsv");
    for (Split s : bundle.splits) out << to_string(s) << '\n';
  } else if (fs::exists(dir / "splits.tsv")) {
    fs::remove(dir / "splits.tsv");
  }
}

std::vector<std::vector<std::size_t>> neighbor_lists(const GraphBundle& bundle) {
  std::vector<std::vector<std::size_t>> adj(bundle.num_nodes);
  for (const auto& e : bundle.edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  for (auto& row : adj) std::sort(row.begin(), row.end());
  return adj;
}

CsrMatrix gcn_normalize(const GraphBundle& bundle) {
  const auto adj = neighbor_lists(bundle);
  const std::size_t n = bundle.num_nodes;
  CsrMatrix m;
  m.rows = m.cols = n;
  m.offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t di = adj[i].size() + 1;
    bool self_done = false;
    auto push = [&](std::size_t j) {
      const std::uint64_t dj = adj[j].size() + 1;
      // Integer product keeps value(i, j) and value(j, i) bitwise equal.
      m.indices.push_back(j);
      m.values.push_back(1.0 / std::sqrt(static_cast<double>(di * dj)));
    };
    for (std::size_t j : adj[i]) {
      if (!self_done && j > i) {
        push(i);
        self_done = true;
      }
      push(j);
    }
    if (!self_done) push(i);
    m.offsets[i + 1] = m.indices.size();
  }
  return m;
}

CsrMatrix mean_aggregator(const GraphBundle& bundle) {
  const auto adj = neighbor_lists(bundle);
  const std::size_t n = bundle.num_nodes;
  CsrMatrix m;
  m.rows = m.cols = n;
  m.offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = adj[i].empty() ? 0.0 : 1.0 / static_cast<double>(adj[i].size());
    for (std::size_t j : adj[i]) {
      m.indices.push_back(j);
      m.values.push_back(w);
    }
    m.offsets[i + 1] = m.indices.size();
  }
  return m;
}

double node_homophily(const GraphBundle& bundle) {
  if (bundle.task != TaskKind::classify) {
    throw ContractError("node_homophily: requires a classification bundle");
  }
  const auto adj = neighbor_lists(bundle);
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < bundle.num_nodes; ++i) {
    if (adj[i].empty()) continue;
    std::size_t same = 0;
    for (std::size_t j : adj[i]) same += bundle.labels[j] == bundle.labels[i] ? 1 : 0;
    total += static_cast<double>(same) / static_cast<double>(adj[i].size());
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

void SbmParams::validate() const {
  if (num_blocks == 0 || num_nodes == 0) throw ContractError("sbm: need at least one node and block");
  if (num_nodes % num_blocks != 0) {
    throw ContractError("sbm: num_blocks must divide num_nodes (balanced blocks)");
  }
  if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0)) {
    throw ContractError("sbm: need 0 <= p_out <= p_in <= 1");
  }
  if (feature_dim < num_blocks) {
    throw ContractError("sbm: feature_dim must be at least num_blocks (one mean axis per block)");
  }
  if (!(feature_noise_sigma >= 0.0) || !(target_noise_sigma >= 0.0)) {
    throw ContractError("sbm: noise levels must be non-negative");
  }
}

GraphBundle generate_sbm(const SbmParams& params) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t n = params.num_nodes;
  const std::size_t block_size = n / params.num_blocks;
  auto block_of = [block_size](std::size_t i) { return i / block_size; };

  GraphBundle b;
  b.num_nodes = n;
  b.num_features = params.feature_dim;
  b.task = params.task;

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = block_of(i) == block_of(j) ? params.p_in : params.p_out;
      if (uniform(rng) < p) b.edges.push_back({i, j});
    }
  }

  std::vector<double> features(n * params.feature_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < params.feature_dim; ++j) {
      const double mean = j == block_of(i) ? params.block_mean_separation : 0.0;
      features[i * params.feature_dim + j] = mean + params.feature_noise_sigma * normal(rng);
    }
  }
  b.features = Tensor::from(n, params.feature_dim, std::move(features));

  if (params.task == TaskKind::classify) {
    b.num_classes = params.num_blocks;
    b.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) b.labels[i] = static_cast<int>(block_of(i));
  } else {
    const double blocks = static_cast<double>(params.num_blocks);
    b.targets.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double exponent =
          params.num_blocks == 1 ? 0.0 : -5.0 + 5.0 * static_cast<double>(block_of(i)) / (blocks - 1.0);
      b.targets[i] = std::pow(10.0, exponent) + params.target_noise_sigma * normal(rng);
    }
  }
  return b;
}

namespace {

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
};

SplitCounts counts_for(std::size_t size, const SplitFractions& f) {
  auto round_count = [size](double frac) {
    return static_cast<std::size_t>(std::llround(frac * static_cast<double>(size)));
  };
  SplitCounts c{round_count(f.train), round_count(f.val)};
  c.train = std::min(c.train, size);
  c.val = std::min(c.val, size - c.train);
  if (size >= 3) {
    // Every split gets at least one member of a group this large.
    if (c.val == 0) {
      c.val = 1;
      if (c.train + c.val > size) --c.train;
    }
    if (c.train + c.val == size) --c.train;
    if (c.train == 0) {
      c.train = 1;
      --c.val;
    }
  }
  return c;
}

void assign_group(std::vector<std::size_t>& members, const SplitFractions& f, std::mt19937_64& rng,
                  std::vector<Split>& tags) {
  std::shuffle(members.begin(), members.end(), rng);
  const SplitCounts c = counts_for(members.size(), f);
  for (std::size_t k = 0; k < members.size(); ++k) {
    tags[members[k]] = k < c.train ? Split::train : (k < c.train + c.val ? Split::val : Split::test);
  }
}

}  // namespace

SplitResult make_splits(const GraphBundle& bundle, SplitFractions fractions, std::uint64_t seed) {
  if (!(fractions.train > 0.0 && fractions.val > 0.0 && fractions.test > 0.0) ||
      std::fabs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw ContractError("make_splits: fractions must be positive and sum to 1");
  }
  SplitResult result;
  result.tags.assign(bundle.num_nodes, Split::test);
  std::mt19937_64 rng(seed);

  bool stratify = bundle.task == TaskKind::classify;
  std::vector<std::vector<std::size_t>> groups;
  if (stratify) {
    groups.resize(bundle.num_classes);
    for (std::size_t i = 0; i < bundle.num_nodes; ++i) {
      groups[static_cast<std::size_t>(bundle.labels[i])].push_back(i);
    }
    for (std::size_t c = 0; c < groups.size(); ++c) {
      if (!groups[c].empty() && groups[c].size() < 3) {
        result.warnings.push_back("class " + std::to_string(c) + " has " +
                                  std::to_string(groups[c].size()) +
                                  " members; falling back to an unstratified split");
        stratify = false;
        break;
      }
    }
  }
  if (!stratify) {
    groups.assign(1, std::vector<std::size_t>(bundle.num_nodes));
    std::iota(groups[0].begin(), groups[0].end(), std::size_t{0});
  }
  for (auto& g : groups) {
    if (!g.empty()) assign_group(g, fractions, rng, result.tags);
  }
  for (Split s : {Split::train, Split::val, Split::test}) {
    if (std::find(result.tags.begin(), result.tags.end(), s) == result.tags.end()) {
      throw ContractError(std::string("make_splits: split '") + to_string(s) +
                          "' would be empty; graph too small for these fractions");
    }
  }
  return result;
}

GraphBundle permute_nodes(const GraphBundle& bundle, const std::vector<std::size_t>& perm) {
  if (perm.size() != bundle.num_nodes) throw ContractError("permute_nodes: wrong permutation size");
  GraphBundle out = bundle;
  const std::size_t d = bundle.num_features;
  std::vector<double> features(bundle.num_nodes * d);
  const auto src = bundle.features.values();
  for (std::size_t i = 0; i < bundle.num_nodes; ++i) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(i * d), d,
                features.begin() + static_cast<std::ptrdiff_t>(perm[i] * d));
  }
  out.features = Tensor::from(bundle.num_nodes, d, std::move(features));
  out.edges.clear();
  for (const auto& e : bundle.edges) out.edges.push_back({perm[e.u], perm[e.v]});
  out.edges = canonical_edges(std::move(out.edges));
  for (std::size_t i = 0; i < bundle.num_nodes; ++i) {
    if (!bundle.labels.empty()) out.labels[perm[i]] = bundle.labels[i];
    if (!bundle.targets.empty()) out.targets[perm[i]] = bundle.targets[i];
    if (!bundle.splits.empty()) out.splits[perm[i]] = bundle.splits[i];
  }
  return out;
}

}  // namespace cnagnn
