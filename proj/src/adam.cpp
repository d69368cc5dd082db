#include "flowsense/adam.hpp"

#include <cmath>
#include <string>

#include "flowsense/errors.hpp"

namespace flowsense::neural {

void adam_step(std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw ValidationError("adam_step: parameter/gradient count mismatch");
  }
  if (state.first_moment.empty()) {
    state.first_moment.reserve(params.size());
    state.second_moment.reserve(params.size());
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ValidationError("adam_step: state was created for a different "
                          "parameter set");
  }
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    const Tensor& g = *grads[p];
    Tensor& m = state.first_moment[p];
    Tensor& v = state.second_moment[p];
    if (!w.same_shape(g) || !w.same_shape(m)) {
      throw ValidationError("adam_step: shape mismatch at parameter " +
                            std::to_string(p) + ": param " + w.shape_str() +
                            " vs grad " + g.shape_str());
    }
    for (int64_t i = 0; i < w.size(); ++i) {
      const double gi = g.at(i);
      m.at(i) = state.beta1 * m.at(i) + (1.0 - state.beta1) * gi;
      v.at(i) = state.beta2 * v.at(i) + (1.0 - state.beta2) * gi * gi;
      const double mhat = m.at(i) / bc1;
      const double vhat = v.at(i) / bc2;
      w.at(i) -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
    if (!w.all_finite()) {
      throw NumericError("adam_step produced non-finite parameter values");
    }
  }
}

}  // namespace flowsense::neural
