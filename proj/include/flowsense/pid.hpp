#pragma once

#include <utility>

namespace flowsense::procsim {

// Discrete PID with output clamping and integral anti-windup (the integral
// is frozen while the output saturates). The derivative acts on the
// measurement, not the error, so setpoint steps do not kick the output.
// Reverse-acting loops use negative gains.
struct PIDController {
  double gain_p = 0.0;   // dimensionless
  double gain_i = 0.0;   // 1/s
  double gain_d = 0.0;   // s
  double setpoint = 0.0;
  double output_min = 0.0;
  double output_max = 0.0;
  double bias = 0.0;
  double integral_state = 0.0;  // accumulated error, seconds * units
  double prev_measurement = 0.0;
  bool has_prev_measurement = false;
};

// One controller evaluation over dt seconds. Pure: returns the clamped
// output and the advanced controller state.
std::pair<double, PIDController> pid_step(const PIDController& c,
                                          double measurement, double dt);

}  // namespace flowsense::procsim
