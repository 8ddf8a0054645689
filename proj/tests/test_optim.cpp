#include <doctest.h>

#include <cmath>

#include "cnagnn/errors.hpp"
#include "cnagnn/optim.hpp"

using namespace cnagnn;

namespace {

void set_grad(Parameter& p, std::vector<double> g) {
  p.tensor.zero_grad();
  auto acc = p.tensor.grad_accumulator();
  std::copy(g.begin(), g.end(), acc.begin());
}

}  // namespace

TEST_CASE("zero gradient and zero decay leaves parameters unchanged") {
  std::vector<Parameter> params{{Tensor::from(1, 3, {1, -2, 3}, true), ParamGroup::weights, "w"}};
  set_grad(params[0], {0, 0, 0});
  AdamState state;
  adam_step(params, state, {});
  CHECK(params[0].tensor.to_vector() == std::vector<double>{1, -2, 3});
  CHECK(state.step == 1);
}

TEST_CASE("first step moves each entry by about lr against its gradient") {
  std::vector<Parameter> params{{Tensor::from(1, 3, {1, 1, 1}, true), ParamGroup::weights, "w"},
                                {Tensor::from(1, 1, {0.5}, true), ParamGroup::activation_coeffs, "a"}};
  set_grad(params[0], {0.3, -2.0, 1e-3});
  set_grad(params[1], {4.0});
  AdamOptions opt;
  opt.lr = 0.1;
  opt.lr_act = 0.01;
  AdamState state;
  adam_step(params, state, opt);
  // Bias-corrected moments are g and g^2, so the step is lr * g / (|g| + eps).
  const double g[] = {0.3, -2.0, 1e-3};
  for (int i = 0; i < 3; ++i) {
    CHECK(params[0].tensor.values()[i] == doctest::Approx(1.0 - 0.1 * g[i] / (std::fabs(g[i]) + 1e-8)).epsilon(1e-14));
  }
  CHECK(params[1].tensor.item() == doctest::Approx(0.5 - 0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("coupled weight decay adds lambda times theta to the gradient") {
  std::vector<Parameter> a{{Tensor::from(1, 1, {2.0}, true), ParamGroup::weights, "w"}};
  std::vector<Parameter> b{{Tensor::from(1, 1, {2.0}, true), ParamGroup::weights, "w"}};
  set_grad(a[0], {0.5});
  set_grad(b[0], {0.5 + 0.1 * 2.0});
  AdamOptions with;
  with.weight_decay = 0.1;
  AdamState sa, sb;
  for (int i = 0; i < 3; ++i) {
    adam_step(a, sa, with);
    adam_step(b, sb, {});
    set_grad(a[0], {0.5});
    set_grad(b[0], {0.5 + 0.1 * a[0].tensor.item()});
  }
  CHECK(a[0].tensor.item() == doctest::Approx(b[0].tensor.item()).epsilon(1e-15));
}

TEST_CASE("single group Adam agrees with a hand-rolled scalar trace") {
  // Minimize (theta - 3)^2 for ten steps with both implementations.
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double theta = -1.0, m = 0.0, v = 0.0;
  std::vector<double> reference;
  for (int t = 1; t <= 10; ++t) {
    const double g = 2.0 * (theta - 3.0);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    theta -= lr * mhat / (std::sqrt(vhat) + eps);
    reference.push_back(theta);
  }

  std::vector<Parameter> params{{Tensor::from(1, 1, {-1.0}, true), ParamGroup::activation_coeffs, "t"}};
  AdamOptions opt;
  opt.lr = opt.lr_act = lr;
  AdamState state;
  for (int t = 0; t < 10; ++t) {
    const double th = params[0].tensor.item();
    set_grad(params[0], {2.0 * (th - 3.0)});
    adam_step(params, state, opt);
    CHECK(std::fabs(params[0].tensor.item() - reference[t]) < 1e-12);
  }
}

TEST_CASE("non-finite update throws and leaves parameters untouched") {
  std::vector<Parameter> params{{Tensor::from(1, 2, {1, 2}, true), ParamGroup::weights, "w"},
                                {Tensor::from(1, 1, {3}, true), ParamGroup::weights, "v"}};
  set_grad(params[0], {0.1, 0.1});
  set_grad(params[1], {std::nan("")});
  AdamState state;
  CHECK_THROWS_AS(adam_step(params, state, {}), NumericError);
  CHECK(params[0].tensor.to_vector() == std::vector<double>{1, 2});
  CHECK(params[1].tensor.item() == 3.0);
}

TEST_CASE("a parameter without a gradient is treated as zero gradient") {
  std::vector<Parameter> params{{Tensor::from(1, 1, {1.0}, true), ParamGroup::weights, "w"}};
  AdamState state;
  adam_step(params, state, {});
  CHECK(params[0].tensor.item() == 1.0);
}
