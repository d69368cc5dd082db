#include "flowsense/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "flowsense/checkpoint.hpp"
#include "flowsense/errors.hpp"
#include "flowsense/init.hpp"
#include "flowsense/prng.hpp"
#include "flowsense/scaling.hpp"

namespace flowsense::model {

using neural::Tape;
using neural::Tensor;

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) {
      throw ValidationError(std::string("model config: ") + name +
                            " must be >= 1");
    }
  };
  positive(node_feat_dim, "node_feat_dim");
  positive(edge_feat_dim, "edge_feat_dim");
  positive(hidden_dim, "hidden_dim");
  positive(mp_rounds, "mp_rounds");
  positive(embed_dim, "embed_dim");
  positive(tf_layers, "tf_layers");
  positive(tf_heads, "tf_heads");
  positive(tf_model_dim, "tf_model_dim");
  positive(lookback, "lookback");
  positive(head_hidden, "head_hidden");
  if (tf_model_dim % tf_heads != 0) {
    throw ValidationError("model config: tf_model_dim must be divisible by "
                          "tf_heads");
  }
  if (embed_dim != hidden_dim) {
    throw ValidationError("model config: embed_dim must equal hidden_dim "
                          "(the readout is a mean over node states)");
  }
}

std::vector<ParamSpec> param_spec(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> spec;
  const int h = cfg.hidden_dim;
  const int dm = cfg.tf_model_dim;
  const int dff = 4 * dm;
  const int hh = cfg.head_hidden;

  spec.push_back({"gnn.in_proj.w", {cfg.node_feat_dim, h}, kGroupGnn, true});
  spec.push_back({"gnn.in_proj.b", {h}, kGroupGnn, true});
  for (int r = 0; r < cfg.mp_rounds; ++r) {
    const std::string p = "gnn.r" + std::to_string(r) + ".";
    spec.push_back({p + "msg.w1", {2 * h + cfg.edge_feat_dim, h}, kGroupGnn, true});
    spec.push_back({p + "msg.b1", {h}, kGroupGnn, true});
    spec.push_back({p + "msg.w2", {h, h}, kGroupGnn, true});
    spec.push_back({p + "msg.b2", {h}, kGroupGnn, true});
    spec.push_back({p + "upd.w1", {2 * h, h}, kGroupGnn, true});
    spec.push_back({p + "upd.b1", {h}, kGroupGnn, true});
    spec.push_back({p + "upd.w2", {h, h}, kGroupGnn, true});
    spec.push_back({p + "upd.b2", {h}, kGroupGnn, true});
  }

  spec.push_back({"tf.in_proj.w", {cfg.embed_dim, dm}, kGroupTemporal, true});
  spec.push_back({"tf.in_proj.b", {dm}, kGroupTemporal, true});
  spec.push_back({"tf.pos_enc", {cfg.lookback, dm}, kGroupTemporal, false});
  for (int l = 0; l < cfg.tf_layers; ++l) {
    const std::string p = "tf.l" + std::to_string(l) + ".";
    spec.push_back({p + "ln1.g", {dm}, kGroupTemporal, true});
    spec.push_back({p + "ln1.b", {dm}, kGroupTemporal, true});
    spec.push_back({p + "attn.wq", {dm, dm}, kGroupTemporal, true});
    spec.push_back({p + "attn.bq", {dm}, kGroupTemporal, true});
    spec.push_back({p + "attn.wk", {dm, dm}, kGroupTemporal, true});
    spec.push_back({p + "attn.bk", {dm}, kGroupTemporal, true});
    spec.push_back({p + "attn.wv", {dm, dm}, kGroupTemporal, true});
    spec.push_back({p + "attn.bv", {dm}, kGroupTemporal, true});
    spec.push_back({p + "attn.wo", {dm, dm}, kGroupTemporal, true});
    spec.push_back({p + "attn.bo", {dm}, kGroupTemporal, true});
    spec.push_back({p + "ln2.g", {dm}, kGroupTemporal, true});
    spec.push_back({p + "ln2.b", {dm}, kGroupTemporal, true});
    spec.push_back({p + "ffn.w1", {dm, dff}, kGroupTemporal, true});
    spec.push_back({p + "ffn.b1", {dff}, kGroupTemporal, true});
    spec.push_back({p + "ffn.w2", {dff, dm}, kGroupTemporal, true});
    spec.push_back({p + "ffn.b2", {dm}, kGroupTemporal, true});
  }
  spec.push_back({"tf.final_ln.g", {dm}, kGroupTemporal, true});
  spec.push_back({"tf.final_ln.b", {dm}, kGroupTemporal, true});

  spec.push_back({"head.w1", {dm, hh}, kGroupHead, true});
  spec.push_back({"head.b1", {hh}, kGroupHead, true});
  spec.push_back({"head.w2", {hh, hh}, kGroupHead, true});
  spec.push_back({"head.b2", {hh}, kGroupHead, true});
  spec.push_back({"head.w3", {hh, 1}, kGroupHead, true});
  spec.push_back({"head.b3", {1}, kGroupHead, true});
  return spec;
}

int ModelParams::index_of(const std::string& name) const {
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

neural::Tensor& ModelParams::find(const std::string& name) {
  const int i = index_of(name);
  if (i < 0) throw ValidationError("unknown parameter: " + name);
  return entries[static_cast<size_t>(i)].tensor;
}

const neural::Tensor& ModelParams::find(const std::string& name) const {
  const int i = index_of(name);
  if (i < 0) throw ValidationError("unknown parameter: " + name);
  return entries[static_cast<size_t>(i)].tensor;
}

void ModelParams::set_trainable_groups(const std::set<std::string>& groups) {
  for (ParamEntry& e : entries) {
    if (e.name == "tf.pos_enc") continue;  // constant table
    e.trainable = groups.count(e.group) != 0;
  }
}

std::vector<std::string> ModelParams::group_names() const {
  std::vector<std::string> out;
  for (const ParamEntry& e : entries) {
    if (std::find(out.begin(), out.end(), e.group) == out.end()) {
      out.push_back(e.group);
    }
  }
  return out;
}

namespace {

Tensor sinusoidal_table(int length, int dim) {
  Tensor pe({length, dim});
  for (int t = 0; t < length; ++t) {
    for (int i = 0; i < dim; ++i) {
      const double angle =
          t / std::pow(10000.0, 2.0 * (i / 2) / static_cast<double>(dim));
      pe.at(t, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

bool is_bias_like(const std::vector<int>& shape) { return shape.size() == 1; }

}  // namespace

ModelParams init_params(const ModelConfig& cfg, uint64_t seed) {
  Xorshift64Star rng(seed);
  ModelParams params;
  for (const ParamSpec& s : param_spec(cfg)) {
    ParamEntry e;
    e.name = s.name;
    e.group = s.group;
    e.trainable = s.trainable;
    if (s.name == "tf.pos_enc") {
      e.tensor = sinusoidal_table(s.shape[0], s.shape[1]);
    } else if (s.name.ends_with("ln1.g") || s.name.ends_with("ln2.g") ||
               s.name.ends_with("final_ln.g")) {
      e.tensor = Tensor(s.shape);
      e.tensor.fill(1.0);
    } else if (is_bias_like(s.shape)) {
      e.tensor = Tensor(s.shape);  // zeros
    } else {
      e.tensor = neural::glorot_uniform(s.shape[0], s.shape[1], rng);
    }
    params.entries.push_back(std::move(e));
  }
  return params;
}

namespace {

constexpr const char* kConfigTensorName = "__config__";

Tensor config_to_tensor(const ModelConfig& cfg) {
  return Tensor({10}, {static_cast<double>(cfg.node_feat_dim),
                       static_cast<double>(cfg.edge_feat_dim),
                       static_cast<double>(cfg.hidden_dim),
                       static_cast<double>(cfg.mp_rounds),
                       static_cast<double>(cfg.embed_dim),
                       static_cast<double>(cfg.tf_layers),
                       static_cast<double>(cfg.tf_heads),
                       static_cast<double>(cfg.tf_model_dim),
                       static_cast<double>(cfg.lookback),
                       static_cast<double>(cfg.head_hidden)});
}

ModelConfig config_from_tensor(const Tensor& t) {
  if (t.size() != 10) {
    throw ValidationError("checkpoint config record has wrong length");
  }
  ModelConfig cfg;
  cfg.node_feat_dim = static_cast<int>(t.at(0));
  cfg.edge_feat_dim = static_cast<int>(t.at(1));
  cfg.hidden_dim = static_cast<int>(t.at(2));
  cfg.mp_rounds = static_cast<int>(t.at(3));
  cfg.embed_dim = static_cast<int>(t.at(4));
  cfg.tf_layers = static_cast<int>(t.at(5));
  cfg.tf_heads = static_cast<int>(t.at(6));
  cfg.tf_model_dim = static_cast<int>(t.at(7));
  cfg.lookback = static_cast<int>(t.at(8));
  cfg.head_hidden = static_cast<int>(t.at(9));
  return cfg;
}

}  // namespace

void save_model(const std::string& path, const ModelConfig& cfg,
                const ModelParams& params) {
  std::vector<neural::NamedTensor> tensors;
  tensors.push_back({kConfigTensorName, config_to_tensor(cfg)});
  for (const ParamEntry& e : params.entries) {
    tensors.push_back({e.name, e.tensor});
  }
  neural::save_tensors(path, tensors);
}

std::pair<ModelConfig, ModelParams> load_model(const std::string& path) {
  const std::vector<neural::NamedTensor> tensors = neural::load_tensors(path);
  const neural::NamedTensor* config_rec = nullptr;
  for (const auto& t : tensors) {
    if (t.name == kConfigTensorName) config_rec = &t;
  }
  if (config_rec == nullptr) {
    throw ValidationError("checkpoint " + path + " has no embedded config");
  }
  const ModelConfig cfg = config_from_tensor(config_rec->tensor);
  cfg.validate();
  const std::vector<ParamSpec> spec = param_spec(cfg);
  if (tensors.size() != spec.size() + 1) {
    throw ValidationError("checkpoint " + path + " holds " +
                          std::to_string(tensors.size() - 1) +
                          " tensors but the config requires " +
                          std::to_string(spec.size()));
  }
  std::map<std::string, const neural::NamedTensor*> by_name;
  for (const auto& t : tensors) {
    if (t.name != kConfigTensorName) by_name[t.name] = &t;
  }
  ModelParams params;
  for (const ParamSpec& s : spec) {
    auto it = by_name.find(s.name);
    if (it == by_name.end()) {
      throw ValidationError("checkpoint " + path + " is missing tensor " +
                            s.name);
    }
    if (it->second->tensor.shape() != s.shape) {
      throw ValidationError("checkpoint " + path + " tensor " + s.name +
                            " has shape " + it->second->tensor.shape_str() +
                            " but the embedded config requires a different "
                            "shape");
    }
    params.entries.push_back({s.name, it->second->tensor, s.group, s.trainable});
  }
  return {cfg, params};
}

FrameFeatures encode_frame(const flowgraph::FlowsheetTopology& topology,
                           const flowgraph::SnapshotFrame& frame) {
  FrameFeatures f;
  f.node_feats = flowgraph::encode_node_features(topology, frame);
  f.edge_feats = flowgraph::encode_edge_features(topology, frame);
  const int nk = flowgraph::kNumUnitKinds;
  const int sk = flowgraph::kNumSensorKinds;
  for (int r = 0; r < f.node_feats.rows(); ++r) {
    for (int c = nk; c < nk + sk; ++c) {
      f.node_feats.at(r, c) = training::log_scale(f.node_feats.at(r, c));
    }
  }
  for (int r = 0; r < f.edge_feats.rows(); ++r) {
    for (int c = 0; c < sk; ++c) {
      f.edge_feats.at(r, c) = training::log_scale(f.edge_feats.at(r, c));
    }
  }
  return f;
}

FeatureCache::FeatureCache(const flowgraph::Dataset& dataset)
    : dataset_(&dataset), cache_(dataset.frames.size()) {}

const FrameFeatures& FeatureCache::get(int frame_index) {
  auto& slot = cache_.at(static_cast<size_t>(frame_index));
  if (!slot.has_value()) {
    slot = encode_frame(dataset_->topology,
                        dataset_->frames[static_cast<size_t>(frame_index)]);
  }
  return *slot;
}

Tape::NodeId BoundModel::node_of(const std::string& name) const {
  const int i = params->index_of(name);
  if (i < 0) throw ValidationError("unknown parameter: " + name);
  return param_nodes[static_cast<size_t>(i)];
}

BoundModel bind(const ModelConfig& cfg, const ModelParams& params,
                neural::Tape& tape, bool with_gradients) {
  cfg.validate();
  BoundModel bound;
  bound.cfg = &cfg;
  bound.params = &params;
  bound.tape = &tape;
  bound.param_nodes.reserve(params.entries.size());
  for (const ParamEntry& e : params.entries) {
    bound.param_nodes.push_back(
        tape.input(e.tensor, with_gradients && e.trainable));
  }
  return bound;
}

namespace {

// GNN over a disjoint union of frame replicas. node_feats [F*N x d_node],
// edge_feats [F*E x d_edge]; edge index vectors already carry replica
// offsets; node_frame maps global node row -> frame slot.
Tape::NodeId gnn_embed(BoundModel& bound, Tape::NodeId node_feats,
                       Tape::NodeId edge_feats,
                       const std::vector<int>& edge_src,
                       const std::vector<int>& edge_dst, int total_nodes,
                       const std::vector<int>& node_frame, int num_frames) {
  Tape& tape = *bound.tape;
  const ModelConfig& cfg = *bound.cfg;

  Tape::NodeId h = tape.add_rowvec(
      tape.matmul(node_feats, bound.node_of("gnn.in_proj.w")),
      bound.node_of("gnn.in_proj.b"));
  for (int r = 0; r < cfg.mp_rounds; ++r) {
    const std::string p = "gnn.r" + std::to_string(r) + ".";
    const Tape::NodeId hu = tape.gather_rows(h, edge_src);
    const Tape::NodeId hv = tape.gather_rows(h, edge_dst);
    const Tape::NodeId msg_in = tape.concat_cols({hu, hv, edge_feats});
    Tape::NodeId msg = tape.add_rowvec(
        tape.matmul(msg_in, bound.node_of(p + "msg.w1")),
        bound.node_of(p + "msg.b1"));
    msg = tape.add_rowvec(tape.matmul(tape.relu(msg), bound.node_of(p + "msg.w2")),
                          bound.node_of(p + "msg.b2"));
    const Tape::NodeId agg = tape.scatter_sum_rows(msg, edge_dst, total_nodes);
    const Tape::NodeId upd_in = tape.concat_cols({h, agg});
    Tape::NodeId upd = tape.add_rowvec(
        tape.matmul(upd_in, bound.node_of(p + "upd.w1")),
        bound.node_of(p + "upd.b1"));
    upd = tape.add_rowvec(tape.matmul(tape.relu(upd), bound.node_of(p + "upd.w2")),
                          bound.node_of(p + "upd.b2"));
    h = tape.add(upd, h);  // residual update
  }
  return tape.segment_mean_rows(h, node_frame, num_frames);
}

Tape::NodeId layer_norm_affine(BoundModel& bound, Tape::NodeId x,
                               const std::string& gain,
                               const std::string& bias) {
  Tape& tape = *bound.tape;
  return tape.add_rowvec(
      tape.mul_rowvec(tape.layer_norm(x), bound.node_of(gain)),
      bound.node_of(bias));
}

// Pre-norm transformer encoder + temporal mean + head over packed
// sequences: embeddings [W*L x d_g], window w occupying rows w*L..w*L+L-1.
Tape::NodeId temporal_head(BoundModel& bound, Tape::NodeId seq,
                           int num_windows) {
  Tape& tape = *bound.tape;
  const ModelConfig& cfg = *bound.cfg;
  const int L = cfg.lookback;

  Tape::NodeId z = tape.add_rowvec(
      tape.matmul(seq, bound.node_of("tf.in_proj.w")),
      bound.node_of("tf.in_proj.b"));

  // Positional encodings tiled over windows; a constant, so zeroing the
  // stored table removes temporal order information entirely.
  const Tensor& pe = bound.params->find("tf.pos_enc");
  Tensor pe_tiled({num_windows * L, cfg.tf_model_dim});
  for (int w = 0; w < num_windows; ++w) {
    for (int t = 0; t < L; ++t) {
      for (int c = 0; c < cfg.tf_model_dim; ++c) {
        pe_tiled.at(w * L + t, c) = pe.at(t, c);
      }
    }
  }
  z = tape.add(z, tape.input(std::move(pe_tiled), false));

  for (int l = 0; l < cfg.tf_layers; ++l) {
    const std::string p = "tf.l" + std::to_string(l) + ".";
    const Tape::NodeId a = layer_norm_affine(bound, z, p + "ln1.g", p + "ln1.b");
    const Tape::NodeId q = tape.add_rowvec(
        tape.matmul(a, bound.node_of(p + "attn.wq")), bound.node_of(p + "attn.bq"));
    const Tape::NodeId kk = tape.add_rowvec(
        tape.matmul(a, bound.node_of(p + "attn.wk")), bound.node_of(p + "attn.bk"));
    const Tape::NodeId vv = tape.add_rowvec(
        tape.matmul(a, bound.node_of(p + "attn.wv")), bound.node_of(p + "attn.bv"));
    const Tape::NodeId att = tape.attention(q, kk, vv, L, cfg.tf_heads);
    const Tape::NodeId o = tape.add_rowvec(
        tape.matmul(att, bound.node_of(p + "attn.wo")), bound.node_of(p + "attn.bo"));
    z = tape.add(z, o);
    const Tape::NodeId f_in = layer_norm_affine(bound, z, p + "ln2.g", p + "ln2.b");
    Tape::NodeId f = tape.add_rowvec(
        tape.matmul(f_in, bound.node_of(p + "ffn.w1")), bound.node_of(p + "ffn.b1"));
    f = tape.add_rowvec(tape.matmul(tape.relu(f), bound.node_of(p + "ffn.w2")),
                        bound.node_of(p + "ffn.b2"));
    z = tape.add(z, f);
  }
  z = layer_norm_affine(bound, z, "tf.final_ln.g", "tf.final_ln.b");

  std::vector<int> row_window(static_cast<size_t>(num_windows) * L);
  for (int w = 0; w < num_windows; ++w) {
    for (int t = 0; t < L; ++t) row_window[static_cast<size_t>(w) * L + t] = w;
  }
  const Tape::NodeId pooled = tape.segment_mean_rows(z, row_window, num_windows);

  Tape::NodeId y = tape.tanh(tape.add_rowvec(
      tape.matmul(pooled, bound.node_of("head.w1")), bound.node_of("head.b1")));
  y = tape.tanh(tape.add_rowvec(tape.matmul(y, bound.node_of("head.w2")),
                                bound.node_of("head.b2")));
  return tape.add_rowvec(tape.matmul(y, bound.node_of("head.w3")),
                         bound.node_of("head.b3"));
}

}  // namespace

Tape::NodeId forward_windows(BoundModel& bound,
                             const std::vector<flowgraph::GraphSample>& windows,
                             FeatureCache& features) {
  Tape& tape = *bound.tape;
  const ModelConfig& cfg = *bound.cfg;
  if (windows.empty()) throw ValidationError("forward_windows: no windows");
  const flowgraph::Dataset& ds = features.dataset();
  for (const auto& w : windows) {
    if (w.dataset != &ds) {
      throw ValidationError("forward_windows: window does not belong to the "
                            "feature cache's dataset");
    }
    if (w.length != cfg.lookback) {
      throw ValidationError("forward_windows: window length " +
                            std::to_string(w.length) + " != lookback " +
                            std::to_string(cfg.lookback));
    }
  }
  const auto endpoints = ds.topology.edge_endpoints();
  const int n_nodes = static_cast<int>(ds.topology.nodes.size());
  const int n_edges = static_cast<int>(ds.topology.edges.size());
  const int L = cfg.lookback;
  const int W = static_cast<int>(windows.size());

  // Distinct frames in this batch, in ascending order.
  std::map<int, int> frame_slot;
  for (const auto& w : windows) {
    for (int t = 0; t < L; ++t) frame_slot[w.first_frame + t] = 0;
  }
  int next_slot = 0;
  for (auto& [frame, slot] : frame_slot) slot = next_slot++;
  const int F = next_slot;

  Tensor node_feats({F * n_nodes, cfg.node_feat_dim});
  Tensor edge_feats({F * n_edges, cfg.edge_feat_dim});
  std::vector<int> edge_src(static_cast<size_t>(F) * n_edges);
  std::vector<int> edge_dst(static_cast<size_t>(F) * n_edges);
  std::vector<int> node_frame(static_cast<size_t>(F) * n_nodes);
  for (const auto& [frame_idx, slot] : frame_slot) {
    const FrameFeatures& ff = features.get(frame_idx);
    if (ff.node_feats.rows() != n_nodes || ff.node_feats.cols() != cfg.node_feat_dim ||
        ff.edge_feats.cols() != cfg.edge_feat_dim) {
      throw ValidationError("forward_windows: feature matrices do not match "
                            "the model config");
    }
    for (int v = 0; v < n_nodes; ++v) {
      node_frame[static_cast<size_t>(slot) * n_nodes + v] = slot;
      for (int c = 0; c < cfg.node_feat_dim; ++c) {
        node_feats.at(slot * n_nodes + v, c) = ff.node_feats.at(v, c);
      }
    }
    for (int e = 0; e < n_edges; ++e) {
      edge_src[static_cast<size_t>(slot) * n_edges + e] =
          slot * n_nodes + endpoints[static_cast<size_t>(e)].first;
      edge_dst[static_cast<size_t>(slot) * n_edges + e] =
          slot * n_nodes + endpoints[static_cast<size_t>(e)].second;
      for (int c = 0; c < cfg.edge_feat_dim; ++c) {
        edge_feats.at(slot * n_edges + e, c) = ff.edge_feats.at(e, c);
      }
    }
  }

  const Tape::NodeId node_in = tape.input(std::move(node_feats), false);
  const Tape::NodeId edge_in = tape.input(std::move(edge_feats), false);
  const Tape::NodeId embeddings =
      gnn_embed(bound, node_in, edge_in, edge_src, edge_dst, F * n_nodes,
                node_frame, F);

  std::vector<int> seq_rows(static_cast<size_t>(W) * L);
  for (int w = 0; w < W; ++w) {
    for (int t = 0; t < L; ++t) {
      seq_rows[static_cast<size_t>(w) * L + t] =
          frame_slot.at(windows[static_cast<size_t>(w)].first_frame + t);
    }
  }
  const Tape::NodeId seq = tape.gather_rows(embeddings, seq_rows);
  return temporal_head(bound, seq, W);
}

double forward(const ModelConfig& cfg, const ModelParams& params,
               const flowgraph::GraphSample& sample) {
  if (sample.dataset == nullptr) {
    throw ValidationError("forward: sample has no dataset");
  }
  Tape tape;
  BoundModel bound = bind(cfg, params, tape, /*with_gradients=*/false);
  FeatureCache features(*sample.dataset);
  const Tape::NodeId pred = forward_windows(bound, {sample}, features);
  return tape.value(pred).at(0);
}

Tensor embed_snapshot(const ModelConfig& cfg, const ModelParams& params,
                      const Tensor& node_feats, const Tensor& edge_feats,
                      const std::vector<std::pair<int, int>>& edges) {
  cfg.validate();
  const int n_nodes = node_feats.rows();
  if (n_nodes < 1) throw ValidationError("embed_snapshot: empty graph");
  if (node_feats.cols() != cfg.node_feat_dim ||
      (edge_feats.rows() > 0 && edge_feats.cols() != cfg.edge_feat_dim) ||
      edge_feats.rows() != static_cast<int>(edges.size())) {
    throw ValidationError("embed_snapshot: feature shape mismatch");
  }
  std::vector<int> src, dst;
  for (const auto& [s, d] : edges) {
    if (s < 0 || s >= n_nodes || d < 0 || d >= n_nodes) {
      throw ValidationError("embed_snapshot: edge index out of range");
    }
    src.push_back(s);
    dst.push_back(d);
  }
  Tape tape;
  BoundModel bound = bind(cfg, params, tape, /*with_gradients=*/false);
  const Tape::NodeId node_in = tape.input(node_feats, false);
  Tensor ef = edge_feats;
  if (ef.shape().size() != 2) ef = Tensor({0, cfg.edge_feat_dim});
  const Tape::NodeId edge_in = tape.input(std::move(ef), false);
  const std::vector<int> node_frame(static_cast<size_t>(n_nodes), 0);
  const Tape::NodeId g =
      gnn_embed(bound, node_in, edge_in, src, dst, n_nodes, node_frame, 1);
  Tensor out({cfg.embed_dim});
  for (int c = 0; c < cfg.embed_dim; ++c) out.at(c) = tape.value(g).at(0, c);
  return out;
}

std::vector<std::pair<double, double>> predict_series(
    const ModelConfig& cfg, const ModelParams& params,
    const flowgraph::Dataset& dataset, const flowgraph::FrameRange& range) {
  const std::vector<flowgraph::GraphSample> windows =
      flowgraph::assemble_windows_range(dataset, range.begin, range.end,
                                        cfg.lookback);
  std::vector<std::pair<double, double>> out;
  out.reserve(windows.size());
  if (windows.empty()) return out;
  FeatureCache features(dataset);
  constexpr size_t kBatch = 256;
  for (size_t start = 0; start < windows.size(); start += kBatch) {
    const size_t stop = std::min(windows.size(), start + kBatch);
    const std::vector<flowgraph::GraphSample> chunk(windows.begin() + start,
                                                    windows.begin() + stop);
    Tape tape;
    BoundModel bound = bind(cfg, params, tape, /*with_gradients=*/false);
    const Tape::NodeId pred = forward_windows(bound, chunk, features);
    for (size_t i = 0; i < chunk.size(); ++i) {
      const auto& w = chunk[i];
      const double t =
          dataset.frames[static_cast<size_t>(w.first_frame + w.length - 1)].time;
      out.emplace_back(t, tape.value(pred).at(static_cast<int>(i), 0));
    }
  }
  return out;
}

}  // namespace flowsense::model
