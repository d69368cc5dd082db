#pragma once

#include <cstdint>
#include <vector>

#include "flowsense/tensor.hpp"

namespace flowsense::neural {

// Adam with bias correction. One state instance serves a fixed ordered set
// of parameters; moment slots are created to match on first use.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int64_t step_count = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

// In-place update of params from grads. Shapes must agree position-wise with
// the state's moments (allocated on the first call).
void adam_step(std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads, AdamState& state);

}  // namespace flowsense::neural
