#include "cnagnn/optim.hpp"

#include <cmath>

#include "cnagnn/errors.hpp"

namespace cnagnn {

void adam_step(std::span<Parameter> params, AdamState& state, const AdamOptions& options) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.tensor.size(), 0.0);
      state.second_moment.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractError("adam_step: parameter list changed between steps");
  }

  const std::size_t t = state.step + 1;
  const double correction1 = 1.0 - std::pow(options.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(options.beta2, static_cast<double>(t));

  // Compute every update before committing so a failure leaves the model intact.
  std::vector<std::vector<double>> m_next(params.size());
  std::vector<std::vector<double>> v_next(params.size());
  std::vector<std::vector<double>> theta_next(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor& tensor = params[p].tensor;
    if (state.first_moment[p].size() != tensor.size()) {
      throw ContractError("adam_step: moment shape differs from parameter " + params[p].name);
    }
    const auto theta = tensor.values();
    const auto grad = tensor.grad();
    const double lr = options.lr_for(params[p].group);
    m_next[p] = state.first_moment[p];
    v_next[p] = state.second_moment[p];
    theta_next[p].assign(theta.begin(), theta.end());
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = (grad.empty() ? 0.0 : grad[i]) + options.weight_decay * theta[i];
      double& m = m_next[p][i];
      double& v = v_next[p][i];
      m = options.beta1 * m + (1.0 - options.beta1) * g;
      v = options.beta2 * v + (1.0 - options.beta2) * g * g;
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      const double updated = theta[i] - lr * m_hat / (std::sqrt(v_hat) + options.eps);
      if (!std::isfinite(updated)) {
        throw NumericError("adam_step: non-finite update for parameter " + params[p].name);
      }
      theta_next[p][i] = updated;
    }
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto values = params[p].tensor.mutable_values();
    std::copy(theta_next[p].begin(), theta_next[p].end(), values.begin());
    state.first_moment[p] = std::move(m_next[p]);
    state.second_moment[p] = std::move(v_next[p]);
  }
  state.step = t;
}

}  // namespace cnagnn
