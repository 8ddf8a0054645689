#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "cnagnn/errors.hpp"
#include "cnagnn/train.hpp"

namespace cnagnn {

std::string steps_label(CnaSteps steps) {
  std::string label;
  auto add = [&label](bool on, const char* name) {
    if (!on) return;
    if (!label.empty()) label += '+';
    label += name;
  };
  add(steps.cluster, "C");
  add(steps.normalize, "N");
  add(steps.activate, "A");
  return label.empty() ? "none" : label;
}

CnaSteps parse_steps(const std::string& label) {
  CnaSteps steps = CnaSteps::none();
  if (label == "none" || label.empty()) return steps;
  std::size_t pos = 0;
  while (pos <= label.size()) {
    const std::size_t end = std::min(label.find('+', pos), label.size());
    const std::string part = label.substr(pos, end - pos);
    bool* flag = part == "C"   ? &steps.cluster
                 : part == "N" ? &steps.normalize
                 : part == "A" ? &steps.activate
                               : nullptr;
    if (flag == nullptr || *flag) throw ContractError("bad step subset '" + label + "'");
    *flag = true;
    pos = end + 1;
  }
  return steps;
}

std::vector<CnaSteps> all_step_subsets() {
  std::vector<CnaSteps> out;
  for (int mask = 7; mask >= 0; --mask) {
    out.push_back({(mask & 4) != 0, (mask & 2) != 0, (mask & 1) != 0});
  }
  return out;
}

namespace {

struct Job {
  TrainConfig config;
  std::size_t slot;
};

// Runs every job, in parallel when OpenMP has more than one thread. Every run
// builds its own data and model, so the results do not depend on scheduling.
std::vector<RunRecord> run_all(const std::vector<Job>& jobs) {
  std::vector<RunRecord> out(jobs.size());
  const auto n = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Job& job = jobs[static_cast<std::size_t>(i)];
    RunRecord r;
    try {
      r = train(job.config);
    } catch (const std::exception& e) {
      r.config = job.config;
      r.failed = true;
      r.failure = e.what();
    }
    out[job.slot] = std::move(r);
  }
  return out;
}

}  // namespace

std::vector<SweepRow> depth_sweep(const TrainConfig& base, std::span<const std::size_t> depths,
                                  std::span<const std::uint64_t> seeds,
                                  std::span<const Activation> activations) {
  if (depths.empty()) throw ContractError("depth_sweep: no depths given");
  if (seeds.empty()) throw ContractError("depth_sweep: no seeds given");
  base.validate();

  std::vector<SweepRow> rows;
  std::vector<Job> jobs;
  for (std::size_t depth : depths) {
    if (depth < 1) throw ContractError("depth_sweep: depth must be at least 1");
    for (Activation act : activations) {
      for (std::uint64_t seed : seeds) {
        TrainConfig c = base;
        c.num_layers = depth;
        c.activation = act;
        c.seed = seed;
        c.dump_clusters.reset();
        SweepRow row;
        row.depth = depth;
        row.activation = act;
        row.seed = seed;
        rows.push_back(std::move(row));
        jobs.push_back({std::move(c), jobs.size()});
      }
    }
  }
  const auto records = run_all(jobs);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RunRecord& r = records[i];
    rows[i].failed = r.failed;
    rows[i].failure = r.failure;
    rows[i].test_metric = r.failed ? std::numeric_limits<double>::quiet_NaN() : r.test_metric;
    rows[i].final_dirichlet = r.failed ? std::numeric_limits<double>::quiet_NaN() : r.output_dirichlet();
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tuple(a.depth, static_cast<int>(a.activation), a.seed) <
           std::tuple(b.depth, static_cast<int>(b.activation), b.seed);
  });
  return rows;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "depth,activation,seed,test_metric,final_dirichlet,failed,failure\r\n";
  for (const auto& r : rows) {
    out << r.depth << ',' << to_string(r.activation) << ',' << r.seed << ','
        << format_number(r.test_metric) << ',' << format_number(r.final_dirichlet) << ','
        << (r.failed ? 1 : 0) << ',' << csv_field(r.failure) << "\r\n";
  }
}

std::vector<AblationRow> ablation_run(const TrainConfig& base, std::span<const CnaSteps> subsets,
                                      std::span<const std::uint64_t> seeds) {
  if (subsets.empty()) throw ContractError("ablation_run: no subsets given");
  if (seeds.empty()) throw ContractError("ablation_run: no seeds given");
  base.validate();

  std::vector<Job> jobs;
  for (const CnaSteps& steps : subsets) {
    for (std::uint64_t seed : seeds) {
      TrainConfig c = base;
      c.activation = Activation::cna;
      c.cna_steps = steps;
      c.seed = seed;
      c.dump_clusters.reset();
      jobs.push_back({std::move(c), jobs.size()});
    }
  }
  const auto records = run_all(jobs);

  std::vector<AblationRow> rows;
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    AblationRow row;
    row.steps = subsets[s];
    std::vector<double> ok;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      const RunRecord& r = records[s * seeds.size() + k];
      if (r.failed) {
        ++row.failures;
        row.per_seed.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        row.per_seed.push_back(r.test_metric);
        ok.push_back(r.test_metric);
      }
    }
    if (ok.empty()) {
      row.mean = row.stddev = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.mean = std::accumulate(ok.begin(), ok.end(), 0.0) / static_cast<double>(ok.size());
      double ss = 0.0;
      for (double v : ok) ss += (v - row.mean) * (v - row.mean);
      row.stddev = ok.size() > 1 ? std::sqrt(ss / static_cast<double>(ok.size() - 1)) : 0.0;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows,
                        std::span<const std::uint64_t> seeds) {
  out << "subset,mean,std,failures";
  for (std::uint64_t s : seeds) out << ",seed" << s;
  out << "\r\n";
  for (const auto& r : rows) {
    out << steps_label(r.steps) << ',' << format_number(r.mean) << ',' << format_number(r.stddev)
        << ',' << r.failures;
    for (double v : r.per_seed) out << ',' << format_number(v);
    out << "\r\n";
  }
}

}  // namespace cnagnn
