#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "flowsense/tensor.hpp"

namespace flowsense::neural {

// Compares tape gradients against central finite differences on randomly
// probed parameter coordinates.
//
// `loss_fn` evaluates the scalar objective for a given parameter set; it must
// be deterministic. `grad_fn` returns the tape gradients for the same
// parameters (same order). Relative error uses max(|a|, |b|, 0.01) as the
// denominator so coordinates with near-zero gradients are judged on the
// absolute scale the finite-difference noise floor supports.
struct GradCheckResult {
  double max_relative_error = 0.0;
  int probes_run = 0;
};

GradCheckResult grad_check(
    const std::function<double(const std::vector<Tensor>&)>& loss_fn,
    const std::function<std::vector<Tensor>(const std::vector<Tensor>&)>& grad_fn,
    const std::vector<Tensor>& params, int n_probes, uint64_t seed,
    double step = 1e-5);

}  // namespace flowsense::neural
