#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowsense/flowgraph.hpp"
#include "flowsense/model.hpp"
#include "flowsense/scaling.hpp"

namespace flowsense::training {

// Zero-mean / unit-std target normalization (population std, divisor N).
struct TargetScaler {
  double mean = 0.0;
  double std = 1.0;

  double apply(double y) const { return (y - mean) / std; }
  double invert(double z) const { return z * std + mean; }
};

// Throws on fewer than two targets or zero variance.
TargetScaler fit_target_scaler(const std::vector<double>& targets);

// Root mean squared error over equal-length series.
double rmse(const std::vector<double>& y, const std::vector<double>& y_hat);

struct TrainConfig {
  double learning_rate = 1e-3;
  int max_epochs = 200;
  int batch_size = 64;
  // Up to this many windows the epoch runs as one full batch; beyond it,
  // shuffled mini-batches of batch_size are drawn from the seeded PRNG.
  int full_batch_threshold = 1024;
  int patience = 10;  // epochs without val improvement before stopping
  uint64_t seed = 1;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_rmse = 0.0;
};

struct TrainResult {
  model::ModelParams params;  // best-validation parameters
  std::vector<EpochStats> history;
  TargetScaler scaler;
  double best_val_rmse = 0.0;
  int best_epoch = -1;
};

// Full pipeline on one dataset: chronological split, window assembly,
// scaler fit on the training split, Adam on the scaled MSE with early
// stopping on the validation split. Deterministic in cfg.seed.
TrainResult train(const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                  const flowgraph::Dataset& dataset);

// Core loop on explicit windows; used by transfer fine-tuning. `initial`
// carries the starting parameters and their trainable flags (frozen groups
// stay untouched). The scaler is supplied by the caller so few-shot subsets
// reuse their dataset's full-train-split statistics.
TrainResult train_on_windows(const model::ModelConfig& mcfg,
                             const TrainConfig& tcfg,
                             model::ModelParams initial,
                             const std::vector<flowgraph::GraphSample>& train_windows,
                             const std::vector<flowgraph::GraphSample>& val_windows,
                             const TargetScaler& scaler,
                             model::FeatureCache& features);

// Batched predictions (normalized units) for windows of one dataset.
std::vector<double> predict_windows(
    const model::ModelConfig& mcfg, const model::ModelParams& params,
    const std::vector<flowgraph::GraphSample>& windows,
    model::FeatureCache& features);

// RMSE per Eq-style definition on normalized targets over a frame range.
double evaluate(const model::ModelConfig& mcfg, const model::ModelParams& params,
                const flowgraph::Dataset& dataset,
                const flowgraph::FrameRange& range, const TargetScaler& scaler);

void write_history_csv(const std::string& path,
                       const std::vector<EpochStats>& history);

}  // namespace flowsense::training
