#pragma once

#include <cmath>

namespace flowsense::training {

// Signed log transform sign(x) * ln(1 + |x|). Odd, strictly increasing,
// fixes zero; applied to sensor value slots only, never to one-hot or mask
// channels.
inline double log_scale(double x) {
  return x >= 0.0 ? std::log1p(x) : -std::log1p(-x);
}

}  // namespace flowsense::training
