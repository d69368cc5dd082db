#pragma once

#include <cmath>

#include "flowsense/prng.hpp"
#include "flowsense/tensor.hpp"

namespace flowsense::neural {

// Glorot-style uniform init in +/- sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(int fan_in, int fan_out, Xorshift64Star& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor w({fan_in, fan_out});
  for (int64_t i = 0; i < w.size(); ++i) w.at(i) = rng.uniform_pm(limit);
  return w;
}

}  // namespace flowsense::neural
