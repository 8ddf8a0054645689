#include <doctest.h>

#include <cmath>
#include <vector>

#include "cnagnn/errors.hpp"
#include "cnagnn/tensor.hpp"
#include "helpers.hpp"

using namespace cnagnn;
using testing::random_tensor;

namespace {

std::vector<double> grad_of(const Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

// Random values in [-2, 2] kept at least `margin` away from zero.
Tensor away_from_zero(std::size_t rows, std::size_t cols, std::uint64_t seed, double margin) {
  Tensor t = random_tensor(rows, cols, seed);
  for (double& v : t.mutable_values()) {
    if (std::fabs(v) < margin) v = v < 0.0 ? -margin - 0.5 : margin + 0.5;
  }
  return t;
}

}  // namespace

TEST_CASE("matmul by identity returns the input") {
  Tensor a = random_tensor(3, 4, 1);
  Tensor out = matmul(a, Tensor::identity(4));
  CHECK(out.to_vector() == a.to_vector());
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  CHECK_THROWS_AS(matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3)), DimensionError);
  CHECK_THROWS_AS(add(Tensor::zeros(2, 3), Tensor::zeros(3, 2)), DimensionError);
}

TEST_CASE("gradient of sum(A*B) with B = ones is 2 everywhere") {
  Tensor a = random_tensor(2, 2, 2);
  Tensor b = Tensor::full(2, 2, 1.0);
  backward(sum(matmul(a, b)));
  for (double g : grad_of(a)) CHECK(g == doctest::Approx(2.0));
}

TEST_CASE("relu forward and subgradient at zero") {
  Tensor x = Tensor::from(1, 3, {-1.0, 0.0, 2.0}, true);
  Tensor y = relu(x);
  CHECK(y.to_vector() == std::vector<double>{0.0, 0.0, 2.0});
  backward(sum(y));
  CHECK(grad_of(x) == std::vector<double>{0.0, 0.0, 1.0});
}

TEST_CASE("mul gradient is the other factor") {
  Tensor a = random_tensor(3, 2, 3);
  Tensor b = random_tensor(3, 2, 4, -2, 2, false);
  backward(sum(mul(a, b)));
  CHECK(grad_of(a) == b.to_vector());
}

TEST_CASE("mean gradient is 1/n per entry") {
  Tensor x = random_tensor(4, 5, 5);
  backward(mean(x));
  for (double g : grad_of(x)) CHECK(g == doctest::Approx(1.0 / 20.0));
}

TEST_CASE("two uses of one tensor accumulate gradients") {
  Tensor w = random_tensor(2, 2, 6);
  Tensor x = random_tensor(2, 2, 7, -2, 2, false);
  // d/dw sum(w*x + w) = x + 1
  backward(sum(add(mul(w, x), w)));
  const auto g = grad_of(w);
  const auto xv = x.to_vector();
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(xv[i] + 1.0));
}

TEST_CASE("reductions along each axis have the documented shapes") {
  Tensor x = random_tensor(3, 4, 8);
  CHECK(sum(x, Axis::rows).shape() == Shape{1, 4});
  CHECK(sum(x, Axis::cols).shape() == Shape{3, 1});
  CHECK(mean(x, Axis::all).shape() == Shape{1, 1});
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x = random_tensor(2, 2, 9);
  CHECK_THROWS_AS(backward(scale(x, 2.0)), ContractError);
}

TEST_CASE("non-finite results raise a numeric error naming the op") {
  Tensor big = Tensor::full(1, 1, 1e308, true);
  try {
    (void)scale(big, 1e10);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("scale") != std::string::npos);
  }
}

TEST_CASE("tape lists every operation after its inputs") {
  Tensor a = random_tensor(2, 3, 10);
  Tensor b = random_tensor(3, 2, 11);
  Tensor h = matmul(a, b);
  Tensor loss = sum(add(h, relu(h)));
  const Tape tape = Tape::record(loss);
  CHECK(tape.size() == 6);  // a, b, matmul, relu, add, sum
  const auto& entries = tape.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (std::size_t in : entries[i].input_positions) CHECK(in < i);
  }
  CHECK(std::string(entries.back().op) == "sum");
}

TEST_CASE("gradients accumulate until cleared") {
  Tensor w = random_tensor(2, 2, 12);
  backward(sum(w));
  backward(sum(w));
  for (double g : grad_of(w)) CHECK(g == 2.0);
  w.zero_grad();
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("detach cuts the history") {
  Tensor w = random_tensor(2, 2, 13);
  Tensor d = scale(w, 3.0).detach();
  CHECK_FALSE(d.requires_grad());
  CHECK(std::string(d.op_name()) == "leaf");
}

TEST_CASE("every differentiable op passes the finite-difference check") {
  constexpr double step = 1e-3;
  constexpr double tol = 1e-4;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CAPTURE(seed);
    Tensor a = random_tensor(3, 4, 100 + seed);
    Tensor b = random_tensor(4, 2, 200 + seed);
    Tensor c = random_tensor(3, 4, 300 + seed);
    Tensor row = random_tensor(1, 4, 400 + seed);
    Tensor m = away_from_zero(3, 4, 500 + seed, 1e-2);
    const Tensor weights = random_tensor(3, 2, 600 + seed, -2, 2, false);
    const Tensor wide = random_tensor(3, 4, 700 + seed, -2, 2, false);

    std::vector<Tensor> ab{a, b};
    CHECK(finite_difference_check([&] { return sum(mul(matmul(a, b), weights)); }, ab, step) < tol);
    std::vector<Tensor> ac{a, c};
    CHECK(finite_difference_check([&] { return sum(mul(sub(mul(a, c), add(a, c)), wide)); }, ac, step) < tol);
    std::vector<Tensor> ar{a, row};
    CHECK(finite_difference_check([&] { return sum(mul(add_row(scale(a, -1.5), row), wide)); }, ar, step) < tol);
    std::vector<Tensor> only_m{m};
    CHECK(finite_difference_check([&] { return sum(mul(relu(m), wide)); }, only_m, step) < tol);
    CHECK(finite_difference_check([&] { return sum(mul(abs(m), wide)); }, only_m, step) < tol);
    std::vector<Tensor> only_a{a};
    CHECK(finite_difference_check([&] { return mean(mul(sum(mul(a, a), Axis::rows), row.detach())); }, only_a, step) < tol);
    CHECK(finite_difference_check([&] { return sum(mul(mean(mul(a, a), Axis::cols), Tensor::full(3, 1, 0.7))); }, only_a, step) < tol);
  }
}

TEST_CASE("spmm gradient matches finite differences") {
  CsrMatrix s;
  s.rows = 3;
  s.cols = 4;
  s.offsets = {0, 2, 3, 5};
  s.indices = {0, 3, 1, 0, 2};
  s.values = {0.5, -1.0, 2.0, 1.5, 0.25};
  const SparseOperator op(s);
  Tensor x = random_tensor(4, 2, 14);
  const Tensor w = random_tensor(3, 2, 15, -2, 2, false);
  std::vector<Tensor> params{x};
  CHECK(finite_difference_check([&] { return sum(mul(spmm(op, x), w)); }, params, 1e-3) < 1e-4);
}
