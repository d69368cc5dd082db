#include "flowsense/procsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "flowsense/errors.hpp"

namespace flowsense::procsim {

namespace {

constexpr double kTinyFlow = 1e-12;  // mol/s below which a stream is "empty"

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double clamp(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

std::array<double, 2> atoms_of(const std::array<double, kNumSpecies>& n) {
  return {2.0 * n[kN2] + n[kNH3], 2.0 * n[kH2] + 3.0 * n[kNH3]};
}

StreamState mix(const StreamState& a, const StreamState& b) {
  StreamState out;
  for (int s = 0; s < kNumSpecies; ++s) {
    out.molar_flow[s] = a.molar_flow[s] + b.molar_flow[s];
  }
  const double na = a.total_flow();
  const double nb = b.total_flow();
  if (na <= kTinyFlow && nb <= kTinyFlow) {
    out.temperature = 0.5 * (a.temperature + b.temperature);
    out.pressure = std::min(a.pressure, b.pressure);
  } else if (na <= kTinyFlow) {
    out.temperature = b.temperature;
    out.pressure = b.pressure;
  } else if (nb <= kTinyFlow) {
    out.temperature = a.temperature;
    out.pressure = a.pressure;
  } else {
    out.temperature = (na * a.temperature + nb * b.temperature) / (na + nb);
    out.pressure = std::min(a.pressure, b.pressure);
  }
  return out;
}

}  // namespace

const char* variant_name(Variant v) { return v == Variant::kA ? "A" : "B"; }

Variant variant_from_name(const std::string& name) {
  if (name == "A" || name == "a") return Variant::kA;
  if (name == "B" || name == "b") return Variant::kB;
  throw ConfigError("unknown process variant '" + name + "' (expected A or B)");
}

double StreamState::mass_flow_g_per_s() const {
  double m = 0.0;
  for (int s = 0; s < kNumSpecies; ++s) m += molar_flow[s] * kMolarMassGPerMol[s];
  return m;
}

double StreamState::nh3_mass_fraction() const {
  const double total = mass_flow_g_per_s();
  if (total <= 0.0) return 0.0;
  return molar_flow[kNH3] * kMolarMassGPerMol[kNH3] / total;
}

std::array<double, 2> atom_rates(const StreamState& s) {
  return atoms_of(s.molar_flow);
}

std::string constants_table_text(const PlantConstants& k) {
  std::ostringstream os;
  auto row = [&os](const char* name, double value, const char* unit,
                   const char* desc) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-28s %14.6g  %-10s %s\n", name, value,
                  unit, desc);
    os << buf;
  };
  os << "# Lumped-parameter loop constants (shared by Process A and B)\n";
  row("feed_n2_mole_frac", k.feed_n2_mole_frac, "-", "fresh feed N2 fraction (H2 = 1 - x)");
  row("feed_temperature", k.feed_temperature_k, "K", "fresh feed temperature");
  row("feed_pressure", k.feed_pressure_bar, "bar", "fresh feed pressure");
  row("k101_pressure_ratio", k.k101_pressure_ratio, "-", "K-101 discharge/suction target");
  row("k102_pressure_ratio", k.k102_pressure_ratio, "-", "K-102 discharge/suction target");
  row("compressor_lag", k.compressor_lag_s, "s", "discharge pressure first-order lag");
  row("isentropic_exponent", k.isentropic_exponent, "-", "T_out = T_in * ratio^kappa");
  row("cp_molar", k.cp_molar_j_per_mol_k, "J/mol/K", "molar heat capacity, all species");
  row("hx_lag", k.hx_lag_s, "s", "exchanger outlet temperature lag");
  row("hx_pressure_drop_frac", k.hx_pressure_drop_frac, "-", "relative dP across exchangers");
  row("cooler_outlet_temp", k.cooler_outlet_temp_k, "K", "E-102 coolant-side target");
  row("conv_max", k.conv_max, "-", "reactor bed conversion prefactor");
  row("conv_temp_slope", k.conv_temp_slope_per_k, "1/K", "sigmoid slope around conv_temp_ref");
  row("conv_temp_ref", k.conv_temp_ref_k, "K", "sigmoid centre temperature");
  row("pressure_ref", k.pressure_ref_bar, "bar", "conversion pressure reference");
  row("pressure_exponent", k.pressure_exponent, "-", "conversion (P/Pref)^b exponent");
  row("equilibrium_cap", k.equilibrium_cap, "-", "bed conversion cap (0.95x applied)");
  row("exotherm", k.exotherm_k, "K", "bed dT per unit NH3 fraction formed");
  row("bed_pressure_drop_frac", k.bed_pressure_drop_frac, "-", "relative dP per bed");
  row("flash_recovery_base", k.flash_recovery_base, "-", "NH3 liquid recovery at Tref");
  row("flash_recovery_slope", k.flash_recovery_slope_per_k, "1/K", "recovery loss per K above Tref");
  row("flash_temp_ref", k.flash_temp_ref_k, "K", "flash recovery reference temperature");
  row("flash_solubility_frac", k.flash_solubility_frac, "-", "N2/H2 fraction lost to liquid");
  row("flash_holdup_capacity", k.flash_holdup_capacity_mol, "mol", "V-101 liquid capacity");
  row("sp_feed", k.sp_feed_mol_per_s, "mol/s", "FC-1 setpoint");
  row("sp_purge", k.sp_purge_mol_per_s, "mol/s", "FC-2 setpoint");
  row("sp_flash_level", k.sp_flash_level, "-", "LC-1 setpoint");
  row("sp_reactor_inlet_temp", k.sp_reactor_inlet_temp_k, "K", "TC-1 setpoint");
  return os.str();
}

namespace {

flowgraph::FlowsheetTopology build_topology(Variant variant) {
  using flowgraph::UnitKind;
  flowgraph::FlowsheetTopology t;
  t.nodes = {
      {"FEED", UnitKind::kFeed},          {"K-101", UnitKind::kCompressor},
      {"M-101", UnitKind::kMixer},        {"K-102", UnitKind::kCompressor},
      {"E-101", UnitKind::kHeaterCooler}, {"E-102", UnitKind::kHeaterCooler},
      {"R-101", UnitKind::kReactor},      {"V-101", UnitKind::kFlashVessel},
      {"SP-101", UnitKind::kPurgeSplitter}, {"PROD", UnitKind::kProduct},
  };
  if (variant == Variant::kA) {
    // Feed is compressed, mixed with recycle, recompressed, heated, reacted,
    // cooled, flashed; flash vapor is purged and recycled.
    t.edges = {
        {"S-FEED", "FEED", "K-101"},  {"S-K101", "K-101", "M-101"},
        {"S-MIX", "M-101", "K-102"},  {"S-K102", "K-102", "E-101"},
        {"S-RIN", "E-101", "R-101"},  {"S-ROUT", "R-101", "E-102"},
        {"S-FLIN", "E-102", "V-101"}, {"S-PROD", "V-101", "PROD"},
        {"S-VAP", "V-101", "SP-101"}, {"S-REC", "SP-101", "M-101"},
    };
  } else {
    // Feed is compressed and mixed with the purged reactor outlet, cooled,
    // flashed; flash vapor is recompressed, heated and reacted.
    t.edges = {
        {"S-FEED", "FEED", "K-101"},  {"S-K101", "K-101", "M-101"},
        {"S-MIX", "M-101", "E-102"},  {"S-FLIN", "E-102", "V-101"},
        {"S-PROD", "V-101", "PROD"},  {"S-VAP", "V-101", "K-102"},
        {"S-K102", "K-102", "E-101"}, {"S-RIN", "E-101", "R-101"},
        {"S-ROUT", "R-101", "SP-101"}, {"S-REC", "SP-101", "M-101"},
    };
  }
  using flowgraph::SensorKind;
  for (const auto& e : t.edges) {
    t.sensors.push_back({"FI-" + e.id, e.id, SensorKind::kFlow});
    t.sensors.push_back({"TI-" + e.id, e.id, SensorKind::kTemperature});
    t.sensors.push_back({"PI-" + e.id, e.id, SensorKind::kPressure});
  }
  t.sensors.push_back({"LI-V101", "V-101", SensorKind::kLevel});
  t.sensors.push_back({"QI-E101", "E-101", SensorKind::kDuty});
  t.sensors.push_back({"QI-E102", "E-102", SensorKind::kDuty});
  t.sensors.push_back({"JI-K101", "K-101", SensorKind::kPower});
  t.sensors.push_back({"JI-K102", "K-102", SensorKind::kPower});
  // Soft-sensor target: product composition. Never emitted as an input.
  t.sensors.push_back({"AI-PROD", "S-PROD", SensorKind::kComposition});
  return t;
}

}  // namespace

Plant::Plant(Variant variant, PlantConstants constants)
    : variant_(variant),
      constants_(constants),
      topology_(build_topology(variant)),
      target_sensor_id_("AI-PROD") {}

const std::vector<std::string>& Plant::controller_names() {
  static const std::vector<std::string> names = {"FC-1", "FC-2", "LC-1",
                                                 "TC-1"};
  return names;
}

ProcessState Plant::initial_state() const {
  const PlantConstants& k = constants_;
  ProcessState st;
  StreamState idle;
  idle.molar_flow = {0.0, 0.0, 0.0};
  idle.temperature = k.feed_temperature_k;
  idle.pressure = k.feed_pressure_bar;
  for (const auto& e : topology_.edges) st.streams[e.id] = idle;
  st.streams["S-REC"].pressure = k.pressure_ref_bar;

  st.flash_holdup_mol = {0.0, 0.0, k.sp_flash_level * k.flash_holdup_capacity_mol};
  st.flash_level = k.sp_flash_level;

  PIDController fc1{.gain_p = k.fc1_gain_p, .gain_i = k.fc1_gain_i,
                    .setpoint = k.sp_feed_mol_per_s, .output_min = k.fc1_out_min,
                    .output_max = k.fc1_out_max, .bias = k.fc1_bias};
  PIDController fc2{.gain_p = k.fc2_gain_p, .gain_i = k.fc2_gain_i,
                    .setpoint = k.sp_purge_mol_per_s, .output_min = k.fc2_out_min,
                    .output_max = k.fc2_out_max, .bias = k.fc2_bias};
  PIDController lc1{.gain_p = k.lc1_gain_p, .gain_i = k.lc1_gain_i,
                    .setpoint = k.sp_flash_level, .output_min = k.lc1_out_min,
                    .output_max = k.lc1_out_max, .bias = k.lc1_bias};
  PIDController tc1{.gain_p = k.tc1_gain_p, .gain_i = k.tc1_gain_i,
                    .setpoint = k.sp_reactor_inlet_temp_k,
                    .output_min = k.tc1_out_min, .output_max = k.tc1_out_max,
                    .bias = k.tc1_bias};
  st.controllers = {{"FC-1", fc1}, {"FC-2", fc2}, {"LC-1", lc1}, {"TC-1", tc1}};

  st.k101_pressure_bar = k.feed_pressure_bar * k.k101_pressure_ratio;
  st.k102_pressure_bar = st.k101_pressure_bar * k.k102_pressure_ratio;
  st.hx1_outlet_temp_k = k.sp_reactor_inlet_temp_k;
  st.hx2_outlet_temp_k = k.cooler_outlet_temp_k;

  st.feed_flow_mol_per_s = k.sp_feed_mol_per_s;
  st.purge_flow_mol_per_s = k.sp_purge_mol_per_s;
  st.product_draw_mol_per_s = k.lc1_bias;
  return st;
}

namespace {

struct CompressorResult {
  StreamState out;
  double power_kw = 0.0;
};

CompressorResult compress(const StreamState& in, double discharge_bar,
                          const PlantConstants& k) {
  CompressorResult r;
  r.out = in;
  r.out.pressure = std::max(discharge_bar, 1e-3);
  const double ratio = std::max(r.out.pressure / std::max(in.pressure, 1e-3), 0.05);
  r.out.temperature = in.temperature * std::pow(ratio, k.isentropic_exponent);
  r.power_kw = k.cp_molar_j_per_mol_k * in.total_flow() *
               (r.out.temperature - in.temperature) / 1000.0;
  return r;
}

StreamState reactor(const StreamState& in, const PlantConstants& k) {
  StreamState s = in;
  for (int bed = 0; bed < 3; ++bed) {
    const double n_total = s.total_flow();
    const double sig =
        sigmoid(k.conv_temp_slope_per_k * (s.temperature - k.conv_temp_ref_k));
    double x = k.conv_max * sig *
               std::pow(std::max(s.pressure, 1e-3) / k.pressure_ref_bar,
                        k.pressure_exponent);
    x = clamp(x, 0.0, 0.95 * k.equilibrium_cap);
    double extent = x * s.molar_flow[kN2];
    extent = std::min(extent, s.molar_flow[kH2] / 3.0);
    s.molar_flow[kN2] -= extent;
    s.molar_flow[kH2] -= 3.0 * extent;
    s.molar_flow[kNH3] += 2.0 * extent;
    if (n_total > kTinyFlow) {
      s.temperature += k.exotherm_k * (2.0 * extent / n_total);
    }
    s.pressure *= (1.0 - k.bed_pressure_drop_frac);
  }
  return s;
}

struct FlashSplit {
  std::array<double, kNumSpecies> liquid{};
  std::array<double, kNumSpecies> vapor{};
};

FlashSplit flash_split(const StreamState& in, const PlantConstants& k) {
  const double lambda =
      clamp(k.flash_recovery_base -
                k.flash_recovery_slope_per_k * (in.temperature - k.flash_temp_ref_k),
            0.0, 1.0);
  FlashSplit f;
  f.liquid[kNH3] = lambda * in.molar_flow[kNH3];
  f.liquid[kN2] = k.flash_solubility_frac * in.molar_flow[kN2];
  f.liquid[kH2] = k.flash_solubility_frac * in.molar_flow[kH2];
  for (int s = 0; s < kNumSpecies; ++s) {
    f.vapor[s] = in.molar_flow[s] - f.liquid[s];
  }
  return f;
}

}  // namespace

void Plant::step(ProcessState& state, double dt, StepAudit* audit) const {
  if (dt <= 0.0) throw ValidationError("step: dt must be positive");
  if (variant_ == Variant::kA) {
    step_a(state, dt, audit);
  } else {
    step_b(state, dt, audit);
  }
  for (const auto& [id, s] : state.streams) {
    for (int i = 0; i < kNumSpecies; ++i) {
      if (!std::isfinite(s.molar_flow[i])) {
        throw NumericError("simulation divergence at t=" +
                           std::to_string(state.time_s) + " s: stream " + id +
                           " molar flow is not finite");
      }
    }
    if (!std::isfinite(s.temperature) || !std::isfinite(s.pressure)) {
      throw NumericError("simulation divergence at t=" +
                         std::to_string(state.time_s) + " s: stream " + id +
                         " temperature/pressure is not finite");
    }
  }
  for (int i = 0; i < kNumSpecies; ++i) {
    if (!std::isfinite(state.flash_holdup_mol[i])) {
      throw NumericError("simulation divergence at t=" +
                         std::to_string(state.time_s) +
                         " s: flash holdup is not finite");
    }
  }
}

namespace {

// Shared flash + level-control block. Consumes the flash inlet, updates the
// holdup and level, emits product and vapor streams.
struct FlashOutcome {
  StreamState product;
  StreamState vapor;
};

FlashOutcome run_flash(ProcessState& state, const StreamState& flin,
                       const PlantConstants& k, double dt) {
  const FlashSplit split = flash_split(flin, k);

  auto& lc1 = state.controllers.at("LC-1");
  auto [draw_cmd, lc1_next] = pid_step(lc1, state.flash_level, dt);
  lc1 = lc1_next;
  const double holdup_total = state.flash_holdup_mol[0] +
                              state.flash_holdup_mol[1] +
                              state.flash_holdup_mol[2];
  double draw = std::min(draw_cmd, holdup_total / dt);
  std::array<double, kNumSpecies> draw_flow{};
  if (holdup_total > kTinyFlow) {
    for (int s = 0; s < kNumSpecies; ++s) {
      draw_flow[s] = draw * state.flash_holdup_mol[s] / holdup_total;
    }
  } else {
    draw = 0.0;
  }
  for (int s = 0; s < kNumSpecies; ++s) {
    state.flash_holdup_mol[s] += (split.liquid[s] - draw_flow[s]) * dt;
    if (state.flash_holdup_mol[s] < 0.0) state.flash_holdup_mol[s] = 0.0;
  }
  const double new_total = state.flash_holdup_mol[0] +
                           state.flash_holdup_mol[1] +
                           state.flash_holdup_mol[2];
  state.flash_level = clamp(new_total / k.flash_holdup_capacity_mol, 0.0, 1.0);
  state.product_draw_mol_per_s = draw;

  FlashOutcome out;
  out.product.molar_flow = draw_flow;
  out.product.temperature = flin.temperature;
  out.product.pressure = flin.pressure;
  out.vapor.molar_flow = split.vapor;
  out.vapor.temperature = flin.temperature;
  out.vapor.pressure = flin.pressure;
  return out;
}

}  // namespace

void Plant::step_a(ProcessState& state, double dt, StepAudit* audit) const {
  const PlantConstants& k = constants_;
  const StreamState recycle_old = state.streams.at("S-REC");
  const std::array<double, kNumSpecies> holdup_before = state.flash_holdup_mol;

  // FC-1 drives the fresh feed valve; measurement is last step's flow.
  auto& fc1 = state.controllers.at("FC-1");
  auto [feed_total, fc1_next] = pid_step(fc1, state.feed_flow_mol_per_s, dt);
  fc1 = fc1_next;
  StreamState feed;
  feed.molar_flow = {feed_total * k.feed_n2_mole_frac,
                     feed_total * (1.0 - k.feed_n2_mole_frac), 0.0};
  feed.temperature = k.feed_temperature_k;
  feed.pressure = k.feed_pressure_bar;
  state.streams["S-FEED"] = feed;

  state.k101_pressure_bar +=
      (feed.pressure * k.k101_pressure_ratio - state.k101_pressure_bar) * dt /
      k.compressor_lag_s;
  const CompressorResult k101 = compress(feed, state.k101_pressure_bar, k);
  state.k101_power_kw = k101.power_kw;
  state.streams["S-K101"] = k101.out;

  const StreamState mixed = mix(k101.out, recycle_old);
  state.streams["S-MIX"] = mixed;

  state.k102_pressure_bar +=
      (mixed.pressure * k.k102_pressure_ratio - state.k102_pressure_bar) * dt /
      k.compressor_lag_s;
  const CompressorResult k102 = compress(mixed, state.k102_pressure_bar, k);
  state.k102_power_kw = k102.power_kw;
  state.streams["S-K102"] = k102.out;

  // TC-1 manipulates the E-101 specific duty toward the reactor inlet
  // setpoint.
  auto& tc1 = state.controllers.at("TC-1");
  auto [duty_per_mol, tc1_next] = pid_step(tc1, state.hx1_outlet_temp_k, dt);
  tc1 = tc1_next;
  const double t_raw =
      k102.out.temperature + duty_per_mol / k.cp_molar_j_per_mol_k;
  state.hx1_duty_kw = duty_per_mol * k102.out.total_flow() / 1000.0;
  state.hx1_outlet_temp_k += (t_raw - state.hx1_outlet_temp_k) * dt / k.hx_lag_s;
  StreamState rin = k102.out;
  rin.temperature = state.hx1_outlet_temp_k;
  rin.pressure = k102.out.pressure * (1.0 - k.hx_pressure_drop_frac);
  state.streams["S-RIN"] = rin;

  const StreamState rout = reactor(rin, k);
  state.streams["S-ROUT"] = rout;

  // E-102 condenses the effluent toward the coolant target.
  state.hx2_outlet_temp_k +=
      (k.cooler_outlet_temp_k - state.hx2_outlet_temp_k) * dt / k.hx_lag_s;
  StreamState flin = rout;
  flin.temperature = state.hx2_outlet_temp_k;
  flin.pressure = rout.pressure * (1.0 - k.hx_pressure_drop_frac);
  state.hx2_duty_kw = k.cp_molar_j_per_mol_k * rout.total_flow() *
                      (flin.temperature - rout.temperature) / 1000.0;
  state.streams["S-FLIN"] = flin;

  const FlashOutcome flash = run_flash(state, flin, k, dt);
  state.streams["S-PROD"] = flash.product;
  state.streams["S-VAP"] = flash.vapor;

  // FC-2 sets the purge draw off the flash vapor.
  auto& fc2 = state.controllers.at("FC-2");
  auto [purge_cmd, fc2_next] = pid_step(fc2, state.purge_flow_mol_per_s, dt);
  fc2 = fc2_next;
  const double vap_total = flash.vapor.total_flow();
  const double purge_total = clamp(purge_cmd, 0.0, vap_total);
  const double phi = vap_total > kTinyFlow ? purge_total / vap_total : 0.0;
  StreamState recycle_new = flash.vapor;
  for (int s = 0; s < kNumSpecies; ++s) {
    state.purge_molar_flow[s] = phi * flash.vapor.molar_flow[s];
    recycle_new.molar_flow[s] = flash.vapor.molar_flow[s] - state.purge_molar_flow[s];
  }
  state.purge_flow_mol_per_s = state.purge_molar_flow[0] +
                               state.purge_molar_flow[1] +
                               state.purge_molar_flow[2];
  state.streams["S-REC"] = recycle_new;

  state.feed_flow_mol_per_s = feed_total;
  state.time_s += dt;

  if (audit != nullptr) {
    const auto in_atoms = atom_rates(feed);
    const auto prod_atoms = atom_rates(flash.product);
    const auto purge_atoms = atoms_of(state.purge_molar_flow);
    const auto rec_new = atom_rates(recycle_new);
    const auto rec_old = atom_rates(recycle_old);
    const auto hold_before = atoms_of(holdup_before);
    const auto hold_after = atoms_of(state.flash_holdup_mol);
    for (int a = 0; a < 2; ++a) {
      audit->atoms_in[a] = in_atoms[a] * dt;
      audit->atoms_out[a] = (prod_atoms[a] + purge_atoms[a]) * dt;
      audit->accumulation[a] =
          (hold_after[a] - hold_before[a]) + (rec_new[a] - rec_old[a]) * dt;
    }
  }
}

void Plant::step_b(ProcessState& state, double dt, StepAudit* audit) const {
  const PlantConstants& k = constants_;
  const StreamState recycle_old = state.streams.at("S-REC");
  const std::array<double, kNumSpecies> holdup_before = state.flash_holdup_mol;

  auto& fc1 = state.controllers.at("FC-1");
  auto [feed_total, fc1_next] = pid_step(fc1, state.feed_flow_mol_per_s, dt);
  fc1 = fc1_next;
  StreamState feed;
  feed.molar_flow = {feed_total * k.feed_n2_mole_frac,
                     feed_total * (1.0 - k.feed_n2_mole_frac), 0.0};
  feed.temperature = k.feed_temperature_k;
  feed.pressure = k.feed_pressure_bar;
  state.streams["S-FEED"] = feed;

  state.k101_pressure_bar +=
      (feed.pressure * k.k101_pressure_ratio - state.k101_pressure_bar) * dt /
      k.compressor_lag_s;
  const CompressorResult k101 = compress(feed, state.k101_pressure_bar, k);
  state.k101_power_kw = k101.power_kw;
  state.streams["S-K101"] = k101.out;

  const StreamState mixed = mix(k101.out, recycle_old);
  state.streams["S-MIX"] = mixed;

  // E-102 cools the combined stream ahead of the flash.
  state.hx2_outlet_temp_k +=
      (k.cooler_outlet_temp_k - state.hx2_outlet_temp_k) * dt / k.hx_lag_s;
  StreamState flin = mixed;
  flin.temperature = state.hx2_outlet_temp_k;
  flin.pressure = mixed.pressure * (1.0 - k.hx_pressure_drop_frac);
  state.hx2_duty_kw = k.cp_molar_j_per_mol_k * mixed.total_flow() *
                      (flin.temperature - mixed.temperature) / 1000.0;
  state.streams["S-FLIN"] = flin;

  const FlashOutcome flash = run_flash(state, flin, k, dt);
  state.streams["S-PROD"] = flash.product;

  StreamState vap = flash.vapor;
  state.streams["S-VAP"] = vap;

  state.k102_pressure_bar +=
      (vap.pressure * k.k102_pressure_ratio - state.k102_pressure_bar) * dt /
      k.compressor_lag_s;
  const CompressorResult k102 = compress(vap, state.k102_pressure_bar, k);
  state.k102_power_kw = k102.power_kw;
  state.streams["S-K102"] = k102.out;

  auto& tc1 = state.controllers.at("TC-1");
  auto [duty_per_mol, tc1_next] = pid_step(tc1, state.hx1_outlet_temp_k, dt);
  tc1 = tc1_next;
  const double t_raw =
      k102.out.temperature + duty_per_mol / k.cp_molar_j_per_mol_k;
  state.hx1_duty_kw = duty_per_mol * k102.out.total_flow() / 1000.0;
  state.hx1_outlet_temp_k += (t_raw - state.hx1_outlet_temp_k) * dt / k.hx_lag_s;
  StreamState rin = k102.out;
  rin.temperature = state.hx1_outlet_temp_k;
  rin.pressure = k102.out.pressure * (1.0 - k.hx_pressure_drop_frac);
  state.streams["S-RIN"] = rin;

  const StreamState rout = reactor(rin, k);
  state.streams["S-ROUT"] = rout;

  // FC-2 purges the reactor outlet before it meets the fresh feed.
  auto& fc2 = state.controllers.at("FC-2");
  auto [purge_cmd, fc2_next] = pid_step(fc2, state.purge_flow_mol_per_s, dt);
  fc2 = fc2_next;
  const double rout_total = rout.total_flow();
  const double purge_total = clamp(purge_cmd, 0.0, rout_total);
  const double phi = rout_total > kTinyFlow ? purge_total / rout_total : 0.0;
  StreamState recycle_new = rout;
  for (int s = 0; s < kNumSpecies; ++s) {
    state.purge_molar_flow[s] = phi * rout.molar_flow[s];
    recycle_new.molar_flow[s] = rout.molar_flow[s] - state.purge_molar_flow[s];
  }
  state.purge_flow_mol_per_s = state.purge_molar_flow[0] +
                               state.purge_molar_flow[1] +
                               state.purge_molar_flow[2];
  state.streams["S-REC"] = recycle_new;

  state.feed_flow_mol_per_s = feed_total;
  state.time_s += dt;

  if (audit != nullptr) {
    const auto in_atoms = atom_rates(feed);
    const auto prod_atoms = atom_rates(flash.product);
    const auto purge_atoms = atoms_of(state.purge_molar_flow);
    const auto rec_new = atom_rates(recycle_new);
    const auto rec_old = atom_rates(recycle_old);
    const auto hold_before = atoms_of(holdup_before);
    const auto hold_after = atoms_of(state.flash_holdup_mol);
    for (int a = 0; a < 2; ++a) {
      audit->atoms_in[a] = in_atoms[a] * dt;
      audit->atoms_out[a] = (prod_atoms[a] + purge_atoms[a]) * dt;
      audit->accumulation[a] =
          (hold_after[a] - hold_before[a]) + (rec_new[a] - rec_old[a]) * dt;
    }
  }
}

std::map<std::string, double> Plant::read_sensors(
    const ProcessState& state) const {
  using flowgraph::SensorKind;
  std::map<std::string, double> out;
  for (const auto& s : topology_.sensors) {
    if (s.sensor_id == target_sensor_id_) continue;
    double value = 0.0;
    switch (s.kind) {
      case SensorKind::kFlow:
        value = state.streams.at(s.location).total_flow();
        break;
      case SensorKind::kTemperature:
        value = state.streams.at(s.location).temperature;
        break;
      case SensorKind::kPressure:
        value = state.streams.at(s.location).pressure;
        break;
      case SensorKind::kLevel:
        value = state.flash_level;
        break;
      case SensorKind::kDuty:
        value = s.location == "E-101" ? state.hx1_duty_kw : state.hx2_duty_kw;
        break;
      case SensorKind::kPower:
        value = s.location == "K-101" ? state.k101_power_kw
                                      : state.k102_power_kw;
        break;
      case SensorKind::kComposition:
        value = state.streams.at(s.location).nh3_mass_fraction();
        break;
    }
    out[s.sensor_id] = value;
  }
  return out;
}

double Plant::target_value(const ProcessState& state) const {
  return state.streams.at("S-PROD").nh3_mass_fraction();
}

std::array<double, 4> Plant::controlled_values(const ProcessState& state) const {
  return {state.feed_flow_mol_per_s, state.purge_flow_mol_per_s,
          state.flash_level, state.hx1_outlet_temp_k};
}

std::array<double, 4> Plant::controlled_setpoints(
    const ProcessState& state) const {
  return {state.controllers.at("FC-1").setpoint,
          state.controllers.at("FC-2").setpoint,
          state.controllers.at("LC-1").setpoint,
          state.controllers.at("TC-1").setpoint};
}

Plant default_process(Variant variant) {
  return Plant(variant, PlantConstants{});
}

bool detect_steady_state(
    const std::vector<std::pair<double, std::array<double, 4>>>& history,
    double tol, double hold_s) {
  if (history.size() < 2) return false;
  const double t_end = history.back().first;
  if (t_end - history.front().first < hold_s) return false;
  const double t_start = t_end - hold_s;
  for (int ch = 0; ch < 4; ++ch) {
    double sum = 0.0;
    int count = 0;
    for (const auto& [t, v] : history) {
      if (t < t_start) continue;
      sum += v[static_cast<size_t>(ch)];
      ++count;
    }
    if (count < 2) return false;
    const double mean = sum / count;
    const double band = tol * std::max(std::abs(mean), 1e-8);
    for (const auto& [t, v] : history) {
      if (t < t_start) continue;
      if (std::abs(v[static_cast<size_t>(ch)] - mean) > band) return false;
    }
  }
  return true;
}

SteadyStateDetector::SteadyStateDetector(double tol, double hold_s)
    : tol_(tol), hold_s_(hold_s) {}

void SteadyStateDetector::reset() { history_.clear(); }

void SteadyStateDetector::add(double t, const std::array<double, 4>& values) {
  history_.emplace_back(t, values);
  // Keep a margin past the hold window so the span check stays meaningful.
  const double cutoff = t - 2.0 * hold_s_;
  size_t drop = 0;
  while (drop < history_.size() && history_[drop].first < cutoff) ++drop;
  if (drop > 0) history_.erase(history_.begin(), history_.begin() + drop);
}

bool SteadyStateDetector::steady() const {
  return detect_steady_state(history_, tol_, hold_s_);
}

}  // namespace flowsense::procsim
