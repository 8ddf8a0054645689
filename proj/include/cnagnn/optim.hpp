#pragma once

#include <span>
#include <vector>

#include "cnagnn/tensor.hpp"

namespace cnagnn {

struct AdamOptions {
  double lr = 1e-3;      // ParamGroup::weights
  double lr_act = 1e-5;  // ParamGroup::activation_coeffs
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  double lr_for(ParamGroup group) const {
    return group == ParamGroup::weights ? lr : lr_act;
  }
};

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::size_t step = 0;
};

/// One Adam step with coupled L2 decay: weight_decay * theta is added to the
/// gradient before the moment updates. A parameter without a gradient is
/// treated as having a zero gradient. Throws NumericError, leaving every
/// parameter untouched, if any update would be non-finite.
void adam_step(std::span<Parameter> params, AdamState& state, const AdamOptions& options);

}  // namespace cnagnn
