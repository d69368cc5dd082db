#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowsense/flowgraph.hpp"
#include "flowsense/pid.hpp"

namespace flowsense::procsim {

enum class Variant { kA, kB };
const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Species order used throughout: N2, H2, NH3.
enum Species : int { kN2 = 0, kH2 = 1, kNH3 = 2 };
constexpr int kNumSpecies = 3;
constexpr std::array<double, kNumSpecies> kMolarMassGPerMol = {
    28.0134, 2.01588, 17.03052};

struct StreamState {
  std::array<double, kNumSpecies> molar_flow{};  // mol/s
  double temperature = 300.0;                    // K
  double pressure = 1.0;                         // bar

  double total_flow() const {
    return molar_flow[0] + molar_flow[1] + molar_flow[2];
  }
  double mass_flow_g_per_s() const;
  double nh3_mass_fraction() const;  // 0 when the stream is empty
};

// N and H atom rates (mol atoms / s) carried by a stream.
std::array<double, 2> atom_rates(const StreamState& s);

// Lumped surrogate constants for both ammonia loops. One table, shared by
// Process A and B ("same equipment sizing and feed flows"). Values are
// implementer-chosen operating points, not literature data; they are tuned
// so both loops settle with a product NH3 mass fraction in (0.5, 1.0) and
// distinct steady states.
struct PlantConstants {
  // Feed: stoichiometric 1:3 N2:H2.
  double feed_n2_mole_frac = 0.25;
  double feed_temperature_k = 305.0;
  double feed_pressure_bar = 25.0;

  // Compressors: fixed pressure ratio toward which the discharge relaxes
  // with a first-order lag; discharge temperature follows an
  // isentropic-lite power law.
  double k101_pressure_ratio = 4.0;
  double k102_pressure_ratio = 2.0;
  double compressor_lag_s = 20.0;
  double isentropic_exponent = 0.23;

  double cp_molar_j_per_mol_k = 30.0;

  // Heat exchangers: first-order outlet-temperature lag. TC-1 manipulates
  // the E-101 duty per mole of throughput (J/mol), which keeps the thermal
  // loop gain independent of the recycle flow; the Duty sensor reports the
  // resulting total duty in kW. E-102 relaxes to a fixed coolant-side
  // target.
  double hx_lag_s = 30.0;
  double hx_pressure_drop_frac = 0.02;
  double cooler_outlet_temp_k = 305.0;

  // Reactor: three beds in series. Per-bed N2 conversion
  //   X = conv_max * sigmoid(conv_temp_slope * (T - conv_temp_ref))
  //              * (P / pressure_ref)^pressure_exponent
  // clipped to [0, 0.95 * equilibrium_cap] and to the available H2.
  double conv_max = 0.25;
  double conv_temp_slope_per_k = 0.02;
  double conv_temp_ref_k = 640.0;
  double pressure_ref_bar = 190.0;
  double pressure_exponent = 0.5;
  double equilibrium_cap = 0.12;
  double exotherm_k = 180.0;  // bed dT per unit NH3 mole fraction formed
  double bed_pressure_drop_frac = 0.01;

  // Flash: NH3 liquid recovery lambda(T) = clamp(recovery_base -
  // recovery_slope * (T - flash_temp_ref), 0, 1); N2/H2 dissolve with a
  // small fixed solubility fraction.
  double flash_recovery_base = 0.8;
  double flash_recovery_slope_per_k = 0.02;
  double flash_temp_ref_k = 305.0;
  double flash_solubility_frac = 0.01;
  double flash_holdup_capacity_mol = 2000.0;

  // Controller setpoints ("Mode I": FC-1 feed flow, FC-2 purge flow,
  // LC-1 flash level, TC-1 reactor inlet temperature).
  double sp_feed_mol_per_s = 100.0;
  double sp_purge_mol_per_s = 6.0;
  double sp_flash_level = 0.5;
  double sp_reactor_inlet_temp_k = 640.0;

  // PID tunings {gain_p, gain_i, out_min, out_max, bias}. LC-1 is
  // reverse-acting (negative gains). TC-1 output is in J/mol.
  double fc1_gain_p = 0.5, fc1_gain_i = 0.05;
  double fc1_out_min = 0.0, fc1_out_max = 250.0, fc1_bias = 100.0;
  double fc2_gain_p = 0.5, fc2_gain_i = 0.05;
  double fc2_out_min = 0.0, fc2_out_max = 100.0, fc2_bias = 6.0;
  double lc1_gain_p = -60.0, lc1_gain_i = -0.3;
  double lc1_out_min = 0.0, lc1_out_max = 120.0, lc1_bias = 30.0;
  double tc1_gain_p = 15.0, tc1_gain_i = 0.125;
  double tc1_out_min = -15000.0, tc1_out_max = 15000.0, tc1_bias = 8000.0;
};

// Human-readable constants table (name, value, unit, description).
std::string constants_table_text(const PlantConstants& k);

struct ProcessState {
  std::map<std::string, StreamState> streams;
  std::array<double, kNumSpecies> flash_holdup_mol{};
  double flash_level = 0.0;
  std::map<std::string, PIDController> controllers;

  // First-order lag memories.
  double k101_pressure_bar = 0.0;
  double k102_pressure_bar = 0.0;
  double hx1_outlet_temp_k = 0.0;
  double hx2_outlet_temp_k = 0.0;

  // Last actuations / measurements, also used by sensors.
  double feed_flow_mol_per_s = 0.0;
  double purge_flow_mol_per_s = 0.0;
  std::array<double, kNumSpecies> purge_molar_flow{};
  double product_draw_mol_per_s = 0.0;
  double hx1_duty_kw = 0.0;
  double hx2_duty_kw = 0.0;
  double k101_power_kw = 0.0;
  double k102_power_kw = 0.0;

  double time_s = 0.0;
};

// Conservation bookkeeping for one step, in atom moles (N, H). The recycle
// tear line holds dt seconds of flow, so its content change counts as
// accumulation alongside the flash holdup.
struct StepAudit {
  std::array<double, 2> atoms_in{};
  std::array<double, 2> atoms_out{};
  std::array<double, 2> accumulation{};
  double residual(int atom) const {
    return atoms_in[atom] - atoms_out[atom] - accumulation[atom];
  }
};

class Plant {
 public:
  Plant(Variant variant, PlantConstants constants);

  Variant variant() const { return variant_; }
  const PlantConstants& constants() const { return constants_; }
  const flowgraph::FlowsheetTopology& topology() const { return topology_; }
  const std::string& target_sensor_id() const { return target_sensor_id_; }

  ProcessState initial_state() const;

  // Advances one explicit step. Throws NumericError naming the offending
  // variable if the state stops being finite.
  void step(ProcessState& state, double dt, StepAudit* audit = nullptr) const;

  // Readings for every bound input sensor. The target composition is NOT
  // included; it travels separately via target_value().
  std::map<std::string, double> read_sensors(const ProcessState& state) const;
  // NH3 mass fraction of the product stream.
  double target_value(const ProcessState& state) const;

  // Controlled-variable vector (feed flow, purge flow, flash level, reactor
  // inlet temperature) for steady-state detection.
  std::array<double, 4> controlled_values(const ProcessState& state) const;
  std::array<double, 4> controlled_setpoints(const ProcessState& state) const;

  static const std::vector<std::string>& controller_names();

 private:
  void step_a(ProcessState& state, double dt, StepAudit* audit) const;
  void step_b(ProcessState& state, double dt, StepAudit* audit) const;

  Variant variant_;
  PlantConstants constants_;
  flowgraph::FlowsheetTopology topology_;
  std::string target_sensor_id_;
};

// Topology, initial state and controllers for the requested loop. Process A
// reacts first and flashes second; Process B flashes first.
Plant default_process(Variant variant);

// True iff every channel of the trailing `hold_s` seconds of history stays
// within +/- tol (relative) of its trailing mean. History entries are
// (time, channel values); it must span at least hold_s seconds.
bool detect_steady_state(
    const std::vector<std::pair<double, std::array<double, 4>>>& history,
    double tol, double hold_s);

// Incremental wrapper over detect_steady_state with a bounded buffer.
class SteadyStateDetector {
 public:
  SteadyStateDetector(double tol, double hold_s);
  void reset();
  void add(double t, const std::array<double, 4>& values);
  bool steady() const;

 private:
  double tol_;
  double hold_s_;
  std::vector<std::pair<double, std::array<double, 4>>> history_;
};

}  // namespace flowsense::procsim
