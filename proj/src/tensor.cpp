#include "cnagnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <utility>

#include "cnagnn/errors.hpp"
#include "cnagnn/kernels.hpp"

namespace cnagnn {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<Tensor> inputs;
  std::function<void(std::span<const double>)> backward;
};

}  // namespace detail

std::string to_string(Shape shape) {
  return "(" + std::to_string(shape.rows) + "x" + std::to_string(shape.cols) + ")";
}

namespace {

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

}  // namespace

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return from(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
  return from(rows, cols, std::vector<double>(rows * cols, value), requires_grad);
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values,
                    bool requires_grad) {
  if (values.size() != rows * cols) {
    throw DimensionError("tensor: " + std::to_string(values.size()) +
                         " values for shape " + to_string({rows, cols}));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = {rows, cols};
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return from(n, n, std::move(v));
}

Shape Tensor::shape() const { return node_->shape; }
bool Tensor::requires_grad() const { return node_->requires_grad; }
const char* Tensor::op_name() const { return node_->op; }
std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::mutable_values() { return node_->value; }

double Tensor::operator()(std::size_t row, std::size_t col) const {
  return node_->value[row * node_->shape.cols + col];
}

double Tensor::item() const {
  if (node_->shape != Shape{1, 1}) {
    throw ContractError("item: tensor of shape " + to_string(node_->shape) + " is not scalar");
  }
  return node_->value[0];
}

bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::grad_accumulator() const {
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from(rows(), cols(), node_->value); }
std::vector<double> Tensor::to_vector() const { return node_->value; }

Tensor record_op(const char* name, Shape shape, std::vector<double> values,
                 std::vector<Tensor> inputs,
                 std::function<void(std::span<const double>)> backward) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(name) + ": non-finite output");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->op = name;
  node->requires_grad =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (node->requires_grad) {
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tape Tape::record(const Tensor& root) {
  Tape tape;
  if (!root.defined() || !root.requires_grad()) return tape;

  std::unordered_map<const detail::Node*, std::size_t> position;
  // Iterative post-order DFS: a node is emitted after all of its inputs.
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  std::unordered_map<const detail::Node*, bool> visited;
  stack.emplace_back(root.node_, 0);
  visited[root.node_.get()] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const auto& child = node->inputs[next++].node_;
      if (child->requires_grad && !visited[child.get()]) {
        visited[child.get()] = true;
        stack.emplace_back(child, 0);
      }
      continue;
    }
    Entry entry;
    entry.op = node->op;
    for (const auto& in : node->inputs) {
      if (!in.node_->requires_grad) continue;
      entry.input_positions.push_back(position.at(in.node_.get()));
    }
    position[node.get()] = tape.nodes_.size();
    tape.nodes_.push_back(node);
    tape.entries_.push_back(std::move(entry));
    stack.pop_back();
  }
  return tape;
}

void Tape::run_backward() const {
  if (nodes_.empty()) return;
  auto& root = *nodes_.back();
  if (root.grad.empty()) root.grad.assign(root.value.size(), 0.0);
  for (double& g : root.grad) g += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::Node& node = **it;
    if (node.backward && !node.grad.empty()) node.backward(node.grad);
  }
}

void backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.shape() != Shape{1, 1}) {
    throw ContractError("backward: loss must be 1x1, got " + to_string(loss.shape()));
  }
  Tape::record(loss).run_backward();
}

void zero_grad(std::span<Parameter> params) {
  for (auto& p : params) p.tensor.zero_grad();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + to_string(a.shape()) + " * " +
                         to_string(b.shape()));
  }
  const kernels::GemmDims dims{a.rows(), a.cols(), b.cols()};
  std::vector<double> out(dims.m * dims.n);
  kernels::gemm_nn(dims, a.values(), b.values(), out, false);
  return record_op("matmul", {dims.m, dims.n}, std::move(out), {a, b},
                   [a, b, dims](std::span<const double> g) mutable {
                     if (a.requires_grad()) {
                       // grad_a (m x k) = g (m x n) * b^T
                       kernels::gemm_nt({dims.m, dims.n, dims.k}, g, b.values(),
                                        a.grad_accumulator(), true);
                     }
                     if (b.requires_grad()) {
                       // grad_b (k x n) = a^T * g
                       kernels::gemm_tn({dims.k, dims.m, dims.n}, a.values(), g,
                                        b.grad_accumulator(), true);
                     }
                   });
}

namespace {

template <typename Fwd, typename DA, typename DB>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  require_same_shape(a, b, name);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  return record_op(name, a.shape(), std::move(out), {a, b},
                   [a, b, da, db](std::span<const double> g) mutable {
                     const auto av = a.values();
                     const auto bv = b.values();
                     if (a.requires_grad()) {
                       auto ga = a.grad_accumulator();
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(av[i], bv[i]);
                     }
                     if (b.requires_grad()) {
                       auto gb = b.grad_accumulator();
                       for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(av[i], bv[i]);
                     }
                   });
}

template <typename Fwd, typename D>
Tensor unary(const char* name, const Tensor& a, Fwd fwd, D d) {
  require_defined(a, name);
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  return record_op(name, a.shape(), std::move(out), {a}, [a, d](std::span<const double> g) mutable {
    const auto av = a.values();
    auto ga = a.grad_accumulator();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * d(av[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; }, [factor](double) { return factor; });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& a) {
  return unary(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_defined(a, "add_row");
  require_defined(row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: row " + to_string(row.shape()) + " does not broadcast over " +
                         to_string(a.shape()));
  }
  const std::size_t n = a.rows();
  const std::size_t d = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto rv = row.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] += rv[j];
  }
  return record_op("add_row", a.shape(), std::move(out), {a, row},
                   [a, row, n, d](std::span<const double> g) mutable {
                     if (a.requires_grad()) {
                       auto ga = a.grad_accumulator();
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                     }
                     if (row.requires_grad()) {
                       auto gr = row.grad_accumulator();
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t j = 0; j < d; ++j) gr[j] += g[i * d + j];
                       }
                     }
                   });
}

namespace {

Tensor reduce(const char* name, const Tensor& a, Axis axis, bool average) {
  require_defined(a, name);
  const std::size_t n = a.rows();
  const std::size_t d = a.cols();
  const auto av = a.values();
  Shape out_shape;
  double extent = 1.0;
  switch (axis) {
    case Axis::rows:
      out_shape = {1, d};
      extent = static_cast<double>(n);
      break;
    case Axis::cols:
      out_shape = {n, 1};
      extent = static_cast<double>(d);
      break;
    case Axis::all:
      out_shape = {1, 1};
      extent = static_cast<double>(n * d);
      break;
  }
  if (average && extent == 0.0) throw DimensionError(std::string(name) + ": empty reduction");
  const double factor = average ? 1.0 / extent : 1.0;

  // Index of the output cell that input (i, j) reduces into.
  auto target = [axis, d](std::size_t i, std::size_t j) -> std::size_t {
    switch (axis) {
      case Axis::rows:
        return j;
      case Axis::cols:
        return i;
      case Axis::all:
        break;
    }
    return 0;
  };

  std::vector<double> out(out_shape.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[target(i, j)] += av[i * d + j];
  }
  if (average) {
    for (double& v : out) v *= factor;
  }
  return record_op(name, out_shape, std::move(out), {a},
                   [a, n, d, factor, target](std::span<const double> g) mutable {
                     auto ga = a.grad_accumulator();
                     for (std::size_t i = 0; i < n; ++i) {
                       for (std::size_t j = 0; j < d; ++j) ga[i * d + j] += factor * g[target(i, j)];
                     }
                   });
}

}  // namespace

Tensor sum(const Tensor& a, Axis axis) { return reduce("sum", a, axis, false); }
Tensor mean(const Tensor& a, Axis axis) { return reduce("mean", a, axis, true); }

Tensor spmm(const SparseOperator& s, const Tensor& x) {
  require_defined(x, "spmm");
  if (!s.defined()) throw ContractError("spmm: undefined sparse operator");
  if (s.matrix().cols != x.rows()) {
    throw DimensionError("spmm: sparse matrix has " + std::to_string(s.matrix().cols) +
                         " columns but input has " + std::to_string(x.rows()) + " rows");
  }
  const std::size_t width = x.cols();
  std::vector<double> out(s.matrix().rows * width);
  kernels::spmm(s.matrix(), x.values(), width, out, false);
  return record_op("spmm", {s.matrix().rows, width}, std::move(out), {x},
                   [s, x, width](std::span<const double> g) mutable {
                     kernels::spmm(s.transpose(), g, width, x.grad_accumulator(), true);
                   });
}

double finite_difference_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                               double step) {
  if (!(step > 0.0)) throw ContractError("finite_difference_check: step must be positive");
  for (auto& p : params) p.zero_grad();
  backward(f());

  double worst = 0.0;
  for (auto& p : params) {
    const std::vector<double> analytic =
        p.has_grad() ? std::vector<double>(p.grad().begin(), p.grad().end())
                     : std::vector<double>(p.size(), 0.0);
    auto values = p.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const double plus = f().item();
      values[i] = original - step;
      const double minus = f().item();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * step);
      const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-6});
      worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace cnagnn
