#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowsense/tensor.hpp"

namespace flowsense::flowgraph {

// Unit-operation families. Index = declaration order; the node one-hot block
// uses these indices directly.
enum class UnitKind : int {
  kFeed = 0,
  kProduct = 1,
  kCompressor = 2,
  kFlashVessel = 3,
  kHeaterCooler = 4,
  kReactor = 5,
  kMixer = 6,
  kPurgeSplitter = 7,
};
constexpr int kNumUnitKinds = 8;

// Shared sensor vocabulary. Plants differ only in which slots are populated,
// which is what lets one parameter set serve differently structured plants.
enum class SensorKind : int {
  kFlow = 0,
  kTemperature = 1,
  kPressure = 2,
  kLevel = 3,
  kComposition = 4,
  kDuty = 5,
  kPower = 6,
};
constexpr int kNumSensorKinds = 7;

constexpr int kNodeFeatureDim = kNumUnitKinds + 2 * kNumSensorKinds;  // 22
constexpr int kEdgeFeatureDim = 2 * kNumSensorKinds;                  // 14

const char* unit_kind_name(UnitKind k);
const char* sensor_kind_name(SensorKind k);
UnitKind unit_kind_from_name(const std::string& name);
SensorKind sensor_kind_from_name(const std::string& name);

struct NodeSpec {
  std::string id;
  UnitKind kind;
};

struct EdgeSpec {
  std::string id;
  std::string src;
  std::string dst;
};

// A sensor bound to a node or edge id. At most one sensor of a given kind
// may sit at a given location.
struct SensorBinding {
  std::string sensor_id;
  std::string location;
  SensorKind kind;
};

struct FlowsheetTopology {
  std::vector<NodeSpec> nodes;
  std::vector<EdgeSpec> edges;
  std::vector<SensorBinding> sensors;

  int node_index(const std::string& id) const;  // -1 if absent
  int edge_index(const std::string& id) const;
  // Edge endpoints as node indices, in edge declaration order.
  std::vector<std::pair<int, int>> edge_endpoints() const;
};

// Every violated invariant as a message; empty means valid.
std::vector<std::string> validate_topology(const FlowsheetTopology& t);

// One timestamped set of sensor readings. `target` carries the soft-sensor
// ground truth and never appears among the readings.
struct SnapshotFrame {
  double time = 0.0;
  std::map<std::string, double> readings;
  std::optional<double> target;
};

struct Dataset;

// A lookback window over a dataset: frames [first_frame, first_frame+length)
// plus the newest frame's target. Holds a view, not copies.
struct GraphSample {
  const Dataset* dataset = nullptr;
  int first_frame = 0;
  int length = 0;
  double target = 0.0;

  const SnapshotFrame& frame(int i) const;
};

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DatasetMeta {
  std::string process_name;
  double sample_interval_s = 0.0;
  // Sensor whose value is the prediction target; excluded from input
  // features by construction.
  std::string target_sensor_id;
  uint64_t seed = 0;
};

struct Dataset {
  FlowsheetTopology topology;
  std::vector<SnapshotFrame> frames;
  SplitFractions split;
  DatasetMeta meta;
};

// [num_nodes x 22]: one-hot unit kind | per-kind sensor values | presence
// mask. Absent sensors contribute zero value and zero mask.
neural::Tensor encode_node_features(const FlowsheetTopology& t,
                                    const SnapshotFrame& f);
// [num_edges x 14]: per-kind values | presence mask.
neural::Tensor encode_edge_features(const FlowsheetTopology& t,
                                    const SnapshotFrame& f);

// All length-L windows whose final frame carries a target, over the full
// frame list or a [begin, end) range.
std::vector<GraphSample> assemble_windows(const Dataset& d, int lookback);
std::vector<GraphSample> assemble_windows_range(const Dataset& d, int begin,
                                                int end, int lookback);

struct FrameRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
};

struct SplitRanges {
  FrameRange train;
  FrameRange val;
  FrameRange test;
};

// Contiguous chronological train/val/test ranges with boundaries at
// floor(N * cumulative_fraction). Fractions are normalized to sum to one;
// an empty range for a non-empty dataset is an error.
SplitRanges chronological_split(const Dataset& d);
SplitRanges chronological_split(int n_frames, const SplitFractions& f);

}  // namespace flowsense::flowgraph
