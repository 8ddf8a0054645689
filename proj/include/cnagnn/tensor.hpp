#pragma once

// Dense row-major double tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a graph node. Every operation on tensors
// that require gradients records its inputs and a backward rule; `backward`
// walks the resulting graph in reverse topological order. The graph is rebuilt
// on every forward pass and released when the last handle to the loss goes away.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cnagnn/csr.hpp"

namespace cnagnn {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const noexcept { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(Shape shape);

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor full(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const noexcept { return node_ != nullptr; }
  Shape shape() const;
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::size_t size() const { return shape().size(); }
  bool requires_grad() const;
  /// Name of the operation that produced this tensor ("leaf" for inputs).
  const char* op_name() const;

  std::span<const double> values() const;
  /// Writable view of the values. Only meaningful on leaves (parameters and
  /// inputs); mutating an interior node does not re-run its consumers.
  std::span<double> mutable_values();
  double operator()(std::size_t row, std::size_t col) const;
  /// The single value of a 1x1 tensor.
  double item() const;

  bool has_grad() const;
  /// Accumulated gradient; empty when nothing has flowed into this tensor yet.
  std::span<const double> grad() const;
  /// Gradient buffer, allocated as zeros on first access. Backward rules
  /// accumulate into this.
  std::span<double> grad_accumulator() const;
  void zero_grad();

  /// Copy of the values with no history and no gradient requirement.
  Tensor detach() const;
  std::vector<double> to_vector() const;

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

 private:
  friend class Tape;
  friend Tensor record_op(const char*, Shape, std::vector<double>, std::vector<Tensor>,
                          std::function<void(std::span<const double>)>);
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

/// Records a custom differentiable operation. `backward` receives the gradient
/// of the output and must accumulate into the inputs through
/// `grad_accumulator()`, touching only inputs that require gradients. The
/// output requires gradients iff any input does; otherwise `backward` is
/// dropped. Throws NumericError naming `name` if any value is non-finite.
Tensor record_op(const char* name, Shape shape, std::vector<double> values,
                 std::vector<Tensor> inputs,
                 std::function<void(std::span<const double> grad_out)> backward);

/// Topologically ordered list of the operations reachable from a loss.
/// Only nodes that require gradients appear.
class Tape {
 public:
  struct Entry {
    const char* op = "leaf";
    std::vector<std::size_t> input_positions;  // positions of taped inputs
  };

  static Tape record(const Tensor& root);

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  /// Runs every backward rule in reverse order, seeding the root with 1.
  void run_backward() const;

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  std::vector<Entry> entries_;
};

/// Populates gradients of every tensor reachable from `loss`. Gradients
/// accumulate across calls until cleared with `zero_grad`.
void backward(const Tensor& loss);

enum class ParamGroup { weights, activation_coeffs };

/// A trainable tensor tagged with the learning-rate group it belongs to.
struct Parameter {
  Tensor tensor;
  ParamGroup group = ParamGroup::weights;
  std::string name;
};

void zero_grad(std::span<Parameter> params);

enum class Axis { rows, cols, all };

// Dense algebra. Binary ops require equal shapes and throw DimensionError otherwise.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
/// Adds a 1 x cols row vector to every row of `a`.
Tensor add_row(const Tensor& a, const Tensor& row);

/// Axis::rows collapses the rows (result 1 x cols), Axis::cols collapses the
/// columns (result rows x 1), Axis::all gives 1 x 1.
Tensor sum(const Tensor& a, Axis axis = Axis::all);
Tensor mean(const Tensor& a, Axis axis = Axis::all);

/// Constant sparse matrix times dense tensor; no gradient flows to the matrix.
Tensor spmm(const SparseOperator& s, const Tensor& x);

/// Largest entrywise relative error between tape gradients and central
/// differences of `f` over every entry of `params`. The relative error of one
/// entry is |analytic - numeric| / max(|analytic|, |numeric|, 1e-6); the floor
/// keeps gradients that are zero up to roundoff from reading as large errors.
double finite_difference_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                               double step);

}  // namespace cnagnn
