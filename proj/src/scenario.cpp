#include "flowsense/scenario.hpp"

#include <cmath>
#include <string>

#include "flowsense/errors.hpp"
#include "flowsense/prng.hpp"

namespace flowsense::procsim {

void ScenarioConfig::validate() const {
  if (duration_hours <= 0.0) throw ConfigError("duration_hours must be positive");
  if (sample_interval_s <= 0.0 || integration_step_s <= 0.0) {
    throw ConfigError("sampling and integration steps must be positive");
  }
  const double ratio = sample_interval_s / integration_step_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw ConfigError("sample_interval_s must be an integer multiple of "
                      "integration_step_s");
  }
  if (perturb_min_frac < 0.0 || perturb_max_frac < perturb_min_frac) {
    throw ConfigError("perturbation fraction range is invalid");
  }
  if (steady_tol <= 0.0 || steady_hold_s <= 0.0) {
    throw ConfigError("steady-state tolerance and hold must be positive");
  }
}

flowgraph::Dataset run_scenario(Variant variant, const ScenarioConfig& cfg) {
  return run_scenario(default_process(variant), cfg);
}

flowgraph::Dataset run_scenario(const Plant& plant, const ScenarioConfig& cfg) {
  cfg.validate();
  const double dt = cfg.integration_step_s;
  const int substeps =
      static_cast<int>(std::round(cfg.sample_interval_s / dt));
  const int n_samples = static_cast<int>(
      std::round(cfg.duration_hours * 3600.0 / cfg.sample_interval_s));

  ProcessState state = plant.initial_state();
  SteadyStateDetector detector(cfg.steady_tol, cfg.steady_hold_s);

  // Warm up to the nominal steady state; this stretch is not sampled.
  double warm_t = 0.0;
  while (warm_t < cfg.warmup_max_s) {
    plant.step(state, dt);
    warm_t += dt;
    detector.add(warm_t, plant.controlled_values(state));
    if (detector.steady()) break;
  }
  state.time_s = 0.0;

  Xorshift64Star rng(cfg.seed);
  enum class Phase { kNominal, kPerturbed };
  Phase phase = Phase::kNominal;
  std::string perturbed_controller;
  double original_setpoint = 0.0;
  double episode_age_s = 0.0;

  flowgraph::Dataset ds;
  ds.topology = plant.topology();
  ds.split = cfg.split;
  ds.meta.process_name = variant_name(plant.variant());
  ds.meta.sample_interval_s = cfg.sample_interval_s;
  ds.meta.target_sensor_id = plant.target_sensor_id();
  ds.meta.seed = cfg.seed;
  ds.frames.reserve(static_cast<size_t>(n_samples));

  for (int k = 0; k < n_samples; ++k) {
    flowgraph::SnapshotFrame frame;
    frame.time = static_cast<double>(k) * cfg.sample_interval_s;
    frame.readings = plant.read_sensors(state);
    frame.target = plant.target_value(state);
    ds.frames.push_back(std::move(frame));

    for (int s = 0; s < substeps; ++s) {
      const bool settled = detector.steady() || episode_age_s >= cfg.max_episode_s;
      if (settled) {
        if (phase == Phase::kNominal) {
          const auto& names = Plant::controller_names();
          perturbed_controller = names[rng.next_below(names.size())];
          const double frac =
              rng.uniform(cfg.perturb_min_frac, cfg.perturb_max_frac);
          const double sign = rng.next_bool() ? 1.0 : -1.0;
          auto& ctrl = state.controllers.at(perturbed_controller);
          original_setpoint = ctrl.setpoint;
          ctrl.setpoint = original_setpoint * (1.0 + sign * frac);
          phase = Phase::kPerturbed;
        } else {
          state.controllers.at(perturbed_controller).setpoint =
              original_setpoint;
          phase = Phase::kNominal;
        }
        detector.reset();
        episode_age_s = 0.0;
      }
      plant.step(state, dt);
      episode_age_s += dt;
      detector.add(state.time_s, plant.controlled_values(state));
    }
  }
  return ds;
}

}  // namespace flowsense::procsim
