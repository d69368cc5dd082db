#include "flowsense/pid.hpp"

#include <algorithm>

#include "flowsense/errors.hpp"

namespace flowsense::procsim {

std::pair<double, PIDController> pid_step(const PIDController& c,
                                          double measurement, double dt) {
  if (dt <= 0.0) throw ValidationError("pid_step: dt must be positive");
  PIDController next = c;
  const double error = c.setpoint - measurement;
  const double derivative =
      c.has_prev_measurement ? -(measurement - c.prev_measurement) / dt : 0.0;
  const double integral_candidate = c.integral_state + error * dt;
  const double raw = c.bias + c.gain_p * error +
                     c.gain_i * integral_candidate + c.gain_d * derivative;
  double output = raw;
  if (raw > c.output_max) {
    output = c.output_max;  // integral frozen while saturated
  } else if (raw < c.output_min) {
    output = c.output_min;
  } else {
    next.integral_state = integral_candidate;
  }
  next.prev_measurement = measurement;
  next.has_prev_measurement = true;
  return {output, next};
}

}  // namespace flowsense::procsim
