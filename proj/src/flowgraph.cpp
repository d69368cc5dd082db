#include "flowsense/flowgraph.hpp"

#include <algorithm>
#include <set>

#include "flowsense/errors.hpp"

namespace flowsense::flowgraph {

namespace {

constexpr const char* kUnitNames[kNumUnitKinds] = {
    "Feed",   "Product", "Compressor", "FlashVessel",
    "HeaterCooler", "Reactor", "Mixer", "PurgeSplitter"};

constexpr const char* kSensorNames[kNumSensorKinds] = {
    "Flow", "Temperature", "Pressure", "Level", "Composition", "Duty", "Power"};

}  // namespace

const char* unit_kind_name(UnitKind k) { return kUnitNames[static_cast<int>(k)]; }
const char* sensor_kind_name(SensorKind k) {
  return kSensorNames[static_cast<int>(k)];
}

UnitKind unit_kind_from_name(const std::string& name) {
  for (int i = 0; i < kNumUnitKinds; ++i) {
    if (name == kUnitNames[i]) return static_cast<UnitKind>(i);
  }
  throw ValidationError("unknown unit kind: " + name);
}

SensorKind sensor_kind_from_name(const std::string& name) {
  for (int i = 0; i < kNumSensorKinds; ++i) {
    if (name == kSensorNames[i]) return static_cast<SensorKind>(i);
  }
  throw ValidationError("unknown sensor kind: " + name);
}

int FlowsheetTopology::node_index(const std::string& id) const {
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

int FlowsheetTopology::edge_index(const std::string& id) const {
  for (size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::pair<int, int>> FlowsheetTopology::edge_endpoints() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(edges.size());
  for (const EdgeSpec& e : edges) {
    out.emplace_back(node_index(e.src), node_index(e.dst));
  }
  return out;
}

std::vector<std::string> validate_topology(const FlowsheetTopology& t) {
  std::vector<std::string> errors;
  std::set<std::string> node_ids;
  for (const NodeSpec& n : t.nodes) {
    if (!node_ids.insert(n.id).second) {
      errors.push_back("duplicate node id " + n.id);
    }
  }
  std::set<std::string> edge_ids;
  for (const EdgeSpec& e : t.edges) {
    if (!edge_ids.insert(e.id).second) {
      errors.push_back("duplicate edge id " + e.id);
    }
    if (node_ids.count(e.src) == 0) {
      errors.push_back("edge " + e.id + " has unknown endpoint " + e.src);
    }
    if (node_ids.count(e.dst) == 0) {
      errors.push_back("edge " + e.id + " has unknown endpoint " + e.dst);
    }
  }
  std::set<std::string> sensor_ids;
  std::set<std::pair<std::string, int>> placements;
  for (const SensorBinding& s : t.sensors) {
    if (!sensor_ids.insert(s.sensor_id).second) {
      errors.push_back("duplicate sensor id " + s.sensor_id);
    }
    if (node_ids.count(s.location) == 0 && edge_ids.count(s.location) == 0) {
      errors.push_back("sensor " + s.sensor_id + " bound to unknown location " +
                       s.location);
    }
    if (!placements.insert({s.location, static_cast<int>(s.kind)}).second) {
      errors.push_back("duplicate sensor kind " +
                       std::string(sensor_kind_name(s.kind)) + " at location " +
                       s.location);
    }
  }
  return errors;
}

const SnapshotFrame& GraphSample::frame(int i) const {
  return dataset->frames[static_cast<size_t>(first_frame + i)];
}

namespace {

// Per-location readings split into node-bound and edge-bound slots.
// Validates that every reading belongs to a bound sensor.
struct BoundReadings {
  // (row, kind) -> value
  std::vector<std::pair<std::pair<int, int>, double>> node_slots;
  std::vector<std::pair<std::pair<int, int>, double>> edge_slots;
};

BoundReadings bind_readings(const FlowsheetTopology& t, const SnapshotFrame& f) {
  BoundReadings out;
  for (const auto& [sensor_id, value] : f.readings) {
    const SensorBinding* binding = nullptr;
    for (const SensorBinding& s : t.sensors) {
      if (s.sensor_id == sensor_id) {
        binding = &s;
        break;
      }
    }
    if (binding == nullptr) {
      throw ValidationError("frame reading references unbound sensor " +
                            sensor_id);
    }
    const int node = t.node_index(binding->location);
    if (node >= 0) {
      out.node_slots.push_back({{node, static_cast<int>(binding->kind)}, value});
      continue;
    }
    const int edge = t.edge_index(binding->location);
    if (edge >= 0) {
      out.edge_slots.push_back({{edge, static_cast<int>(binding->kind)}, value});
      continue;
    }
    throw ValidationError("sensor " + sensor_id + " bound to unknown location " +
                          binding->location);
  }
  return out;
}

}  // namespace

neural::Tensor encode_node_features(const FlowsheetTopology& t,
                                    const SnapshotFrame& f) {
  const int n = static_cast<int>(t.nodes.size());
  neural::Tensor feats({n, kNodeFeatureDim});
  for (int v = 0; v < n; ++v) {
    feats.at(v, static_cast<int>(t.nodes[static_cast<size_t>(v)].kind)) = 1.0;
  }
  const BoundReadings bound = bind_readings(t, f);
  for (const auto& [slot, value] : bound.node_slots) {
    const auto [row, kind] = slot;
    feats.at(row, kNumUnitKinds + kind) = value;
    feats.at(row, kNumUnitKinds + kNumSensorKinds + kind) = 1.0;
  }
  return feats;
}

neural::Tensor encode_edge_features(const FlowsheetTopology& t,
                                    const SnapshotFrame& f) {
  const int n = static_cast<int>(t.edges.size());
  neural::Tensor feats({n, kEdgeFeatureDim});
  const BoundReadings bound = bind_readings(t, f);
  for (const auto& [slot, value] : bound.edge_slots) {
    const auto [row, kind] = slot;
    feats.at(row, kind) = value;
    feats.at(row, kNumSensorKinds + kind) = 1.0;
  }
  return feats;
}

std::vector<GraphSample> assemble_windows(const Dataset& d, int lookback) {
  return assemble_windows_range(d, 0, static_cast<int>(d.frames.size()),
                                lookback);
}

std::vector<GraphSample> assemble_windows_range(const Dataset& d, int begin,
                                                int end, int lookback) {
  if (lookback < 1) throw ValidationError("lookback must be >= 1");
  if (begin < 0 || end > static_cast<int>(d.frames.size()) || begin > end) {
    throw ValidationError("window range out of bounds");
  }
  std::vector<GraphSample> out;
  for (int t = begin + lookback - 1; t < end; ++t) {
    const auto& target = d.frames[static_cast<size_t>(t)].target;
    if (!target.has_value()) continue;
    out.push_back(GraphSample{&d, t - lookback + 1, lookback, *target});
  }
  return out;
}

SplitRanges chronological_split(int n_frames, const SplitFractions& f) {
  if (f.train <= 0.0 || f.val <= 0.0 || f.test <= 0.0) {
    throw ValidationError("split fractions must be positive");
  }
  const double total = f.train + f.val + f.test;
  const double c1 = f.train / total;
  const double c2 = (f.train + f.val) / total;
  const int b1 = static_cast<int>(n_frames * c1);
  const int b2 = static_cast<int>(n_frames * c2);
  SplitRanges r{{0, b1}, {b1, b2}, {b2, n_frames}};
  if (n_frames > 0 &&
      (r.train.size() == 0 || r.val.size() == 0 || r.test.size() == 0)) {
    throw ValidationError("chronological split produced an empty range for " +
                          std::to_string(n_frames) + " frames");
  }
  return r;
}

SplitRanges chronological_split(const Dataset& d) {
  return chronological_split(static_cast<int>(d.frames.size()), d.split);
}

}  // namespace flowsense::flowgraph
