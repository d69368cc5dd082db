#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "flowsense/flowgraph.hpp"
#include "flowsense/tape.hpp"
#include "flowsense/tensor.hpp"

namespace flowsense::model {

// Spatio-temporal soft-sensor architecture: per-frame message-passing GNN,
// transformer encoder over the lookback window, temporal mean pooling and a
// three-layer MLP head.
struct ModelConfig {
  int node_feat_dim = flowgraph::kNodeFeatureDim;
  int edge_feat_dim = flowgraph::kEdgeFeatureDim;
  int hidden_dim = 64;
  int mp_rounds = 2;
  // Flowsheet embedding width d_g. The readout is a mean over node states,
  // so this must equal hidden_dim.
  int embed_dim = 64;
  int tf_layers = 2;
  int tf_heads = 4;
  int tf_model_dim = 64;
  int lookback = 5;
  int head_hidden = 64;

  void validate() const;
};

// Parameter groups for transfer freezing.
inline constexpr const char* kGroupGnn = "gnn";
inline constexpr const char* kGroupTemporal = "temporal";
inline constexpr const char* kGroupHead = "head";

struct ParamEntry {
  std::string name;
  neural::Tensor tensor;
  std::string group;
  // Constant tables (the positional encoding) are never trainable.
  bool trainable = true;
};

struct ModelParams {
  std::vector<ParamEntry> entries;

  int index_of(const std::string& name) const;  // -1 when absent
  neural::Tensor& find(const std::string& name);
  const neural::Tensor& find(const std::string& name) const;
  // Marks entries trainable iff their group is listed (constants stay
  // frozen regardless).
  void set_trainable_groups(const std::set<std::string>& groups);
  std::vector<std::string> group_names() const;
};

// Name/shape/group layout for a config; single source of truth shared by
// init and checkpoint validation.
struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  std::string group;
  bool trainable;
};
std::vector<ParamSpec> param_spec(const ModelConfig& cfg);

// Glorot-uniform weights, zero biases, unit layer-norm gains, sinusoidal
// positional table. Deterministic in the seed.
ModelParams init_params(const ModelConfig& cfg, uint64_t seed);

// Checkpoint = named-tensor archive with the config embedded; loading
// refuses archives whose config and tensor shapes disagree.
void save_model(const std::string& path, const ModelConfig& cfg,
                const ModelParams& params);
std::pair<ModelConfig, ModelParams> load_model(const std::string& path);

// Node/edge features of one frame, log-scaled on the sensor value slots.
struct FrameFeatures {
  neural::Tensor node_feats;
  neural::Tensor edge_feats;
};
FrameFeatures encode_frame(const flowgraph::FlowsheetTopology& topology,
                           const flowgraph::SnapshotFrame& frame);

// Lazily encoded per-frame features of one dataset. Not thread-safe; use
// one cache per training run.
class FeatureCache {
 public:
  explicit FeatureCache(const flowgraph::Dataset& dataset);
  const FrameFeatures& get(int frame_index);
  const flowgraph::Dataset& dataset() const { return *dataset_; }

 private:
  const flowgraph::Dataset* dataset_;
  std::vector<std::optional<FrameFeatures>> cache_;
};

// Model parameters bound onto a tape as leaves. Frozen entries become
// constants, so backward skips their subgraphs.
struct BoundModel {
  const ModelConfig* cfg = nullptr;
  const ModelParams* params = nullptr;
  neural::Tape* tape = nullptr;
  std::vector<neural::Tape::NodeId> param_nodes;

  neural::Tape::NodeId node_of(const std::string& name) const;
};

BoundModel bind(const ModelConfig& cfg, const ModelParams& params,
                neural::Tape& tape, bool with_gradients = true);

// Batched forward over windows that share one dataset/topology. Each
// distinct frame is embedded once; windows gather their frame embeddings.
// Returns the [num_windows x 1] prediction node (normalized units).
neural::Tape::NodeId forward_windows(
    BoundModel& bound, const std::vector<flowgraph::GraphSample>& windows,
    FeatureCache& features);

// Single-sample convenience wrapper (no gradients).
double forward(const ModelConfig& cfg, const ModelParams& params,
               const flowgraph::GraphSample& sample);

// One message-passing embedding of a single frame from raw feature
// matrices; edges are (src, dst) node index pairs. Returns [embed_dim].
neural::Tensor embed_snapshot(const ModelConfig& cfg, const ModelParams& params,
                              const neural::Tensor& node_feats,
                              const neural::Tensor& edge_feats,
                              const std::vector<std::pair<int, int>>& edges);

// Predictions over every window of a frame range, paired with the window's
// target timestamp.
std::vector<std::pair<double, double>> predict_series(
    const ModelConfig& cfg, const ModelParams& params,
    const flowgraph::Dataset& dataset, const flowgraph::FrameRange& range);

}  // namespace flowsense::model
