#pragma once

#include <cstdint>

#include "flowsense/flowgraph.hpp"
#include "flowsense/procsim.hpp"

namespace flowsense::procsim {

struct ScenarioConfig {
  double duration_hours = 80.0;
  double sample_interval_s = 36.0;
  double integration_step_s = 3.6;
  double perturb_min_frac = 0.01;
  double perturb_max_frac = 0.20;
  double steady_tol = 5e-4;
  double steady_hold_s = 900.0;
  // An episode that has not settled by this age transitions anyway, so the
  // schedule always makes progress.
  double max_episode_s = 7200.0;
  double warmup_max_s = 43200.0;
  uint64_t seed = 1;
  flowgraph::SplitFractions split{};

  void validate() const;
};

// Setpoint-perturbation data generation: warm up to the nominal steady
// state, then repeatedly pick one controller at random, shift its setpoint
// by a signed 1-20% fraction, run to steady state, revert, run to steady
// state again. Sensors are sampled every sample_interval_s into frames; the
// target channel is the product NH3 mass fraction. Deterministic in
// (variant, cfg) including the seed.
flowgraph::Dataset run_scenario(Variant variant, const ScenarioConfig& cfg);
flowgraph::Dataset run_scenario(const Plant& plant, const ScenarioConfig& cfg);

}  // namespace flowsense::procsim
