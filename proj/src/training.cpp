#include "flowsense/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "flowsense/adam.hpp"
#include "flowsense/errors.hpp"
#include "flowsense/prng.hpp"
#include "flowsense/tape.hpp"

namespace flowsense::training {

using neural::Tape;
using neural::Tensor;

TargetScaler fit_target_scaler(const std::vector<double>& targets) {
  if (targets.size() < 2) {
    throw ValidationError("target scaler needs at least 2 targets, got " +
                          std::to_string(targets.size()));
  }
  double mean = 0.0;
  for (double y : targets) mean += y;
  mean /= static_cast<double>(targets.size());
  double var = 0.0;
  for (double y : targets) var += (y - mean) * (y - mean);
  var /= static_cast<double>(targets.size());
  const double std_dev = std::sqrt(var);
  if (std_dev <= 0.0) {
    throw ValidationError("degenerate target: zero variance");
  }
  return TargetScaler{mean, std_dev};
}

double rmse(const std::vector<double>& y, const std::vector<double>& y_hat) {
  if (y.empty()) throw ValidationError("rmse of empty series");
  if (y.size() != y_hat.size()) {
    throw ValidationError("rmse length mismatch: " + std::to_string(y.size()) +
                          " vs " + std::to_string(y_hat.size()));
  }
  double acc = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - y_hat[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(y.size()));
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

namespace {

std::vector<double> window_targets(
    const std::vector<flowgraph::GraphSample>& windows) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(w.target);
  return out;
}

}  // namespace

std::vector<double> predict_windows(
    const model::ModelConfig& mcfg, const model::ModelParams& params,
    const std::vector<flowgraph::GraphSample>& windows,
    model::FeatureCache& features) {
  std::vector<double> out;
  out.reserve(windows.size());
  constexpr size_t kBatch = 256;
  for (size_t start = 0; start < windows.size(); start += kBatch) {
    const size_t stop = std::min(windows.size(), start + kBatch);
    const std::vector<flowgraph::GraphSample> chunk(windows.begin() + start,
                                                    windows.begin() + stop);
    Tape tape;
    model::BoundModel bound =
        model::bind(mcfg, params, tape, /*with_gradients=*/false);
    const Tape::NodeId pred = model::forward_windows(bound, chunk, features);
    for (size_t i = 0; i < chunk.size(); ++i) {
      out.push_back(tape.value(pred).at(static_cast<int>(i), 0));
    }
  }
  return out;
}

TrainResult train_on_windows(
    const model::ModelConfig& mcfg, const TrainConfig& tcfg,
    model::ModelParams initial,
    const std::vector<flowgraph::GraphSample>& train_windows,
    const std::vector<flowgraph::GraphSample>& val_windows,
    const TargetScaler& scaler, model::FeatureCache& features) {
  mcfg.validate();
  tcfg.validate();
  if (train_windows.empty()) throw ValidationError("no training windows");
  if (val_windows.empty()) throw ValidationError("no validation windows");

  model::ModelParams params = std::move(initial);
  std::vector<size_t> trainable_idx;
  for (size_t i = 0; i < params.entries.size(); ++i) {
    if (params.entries[i].trainable) trainable_idx.push_back(i);
  }
  if (trainable_idx.empty()) {
    throw ValidationError("train_on_windows: every parameter group is frozen");
  }

  neural::AdamState adam;
  adam.learning_rate = tcfg.learning_rate;

  Xorshift64Star rng(tcfg.seed);
  const int n_train = static_cast<int>(train_windows.size());
  const bool full_batch = n_train <= tcfg.full_batch_threshold;

  const std::vector<double> val_targets_raw = window_targets(val_windows);
  std::vector<double> val_targets_scaled;
  val_targets_scaled.reserve(val_targets_raw.size());
  for (double y : val_targets_raw) val_targets_scaled.push_back(scaler.apply(y));

  TrainResult result;
  result.scaler = scaler;
  result.best_val_rmse = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;

  std::vector<int> order(static_cast<size_t>(n_train));
  for (int i = 0; i < n_train; ++i) order[static_cast<size_t>(i)] = i;

  for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    try {
      if (!full_batch) {
        for (int i = n_train - 1; i > 0; --i) {  // Fisher-Yates
          const int j = static_cast<int>(
              rng.next_below(static_cast<uint64_t>(i) + 1));
          std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
        }
      }
      double loss_sum = 0.0;
      const int step_size = full_batch ? n_train : tcfg.batch_size;
      for (int start = 0; start < n_train; start += step_size) {
        const int stop = std::min(n_train, start + step_size);
        std::vector<flowgraph::GraphSample> batch;
        batch.reserve(static_cast<size_t>(stop - start));
        Tensor targets({stop - start, 1});
        for (int i = start; i < stop; ++i) {
          const auto& w = train_windows[static_cast<size_t>(order[static_cast<size_t>(i)])];
          batch.push_back(w);
          targets.at(i - start, 0) = scaler.apply(w.target);
        }
        Tape tape;
        model::BoundModel bound = model::bind(mcfg, params, tape);
        const Tape::NodeId pred = model::forward_windows(bound, batch, features);
        const Tape::NodeId target_node = tape.input(std::move(targets), false);
        const Tape::NodeId loss = tape.mse(pred, target_node);
        const double loss_value = tape.value(loss).at(0);
        if (!std::isfinite(loss_value)) {
          throw NumericError("non-finite loss");
        }
        tape.backward(loss);

        std::vector<Tensor*> tensors;
        std::vector<const Tensor*> grads;
        tensors.reserve(trainable_idx.size());
        grads.reserve(trainable_idx.size());
        for (size_t t : trainable_idx) {
          tensors.push_back(&params.entries[t].tensor);
          grads.push_back(&tape.grad(bound.param_nodes[t]));
        }
        adam_step(tensors, grads, adam);
        loss_sum += loss_value * (stop - start);
      }
      const double train_loss = loss_sum / n_train;

      const std::vector<double> val_pred =
          predict_windows(mcfg, params, val_windows, features);
      const double val_rmse = rmse(val_targets_scaled, val_pred);
      result.history.push_back({epoch, train_loss, val_rmse});

      if (val_rmse < result.best_val_rmse) {
        result.best_val_rmse = val_rmse;
        result.best_epoch = epoch;
        result.params = params;
        epochs_since_improvement = 0;
      } else {
        ++epochs_since_improvement;
        if (epochs_since_improvement >= tcfg.patience) break;
      }
    } catch (const NumericError& e) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                         ": " + e.what());
    }
  }
  if (result.best_epoch < 0) {
    throw NumericError("training never produced a finite validation score");
  }
  return result;
}

TrainResult train(const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                  const flowgraph::Dataset& dataset) {
  const flowgraph::SplitRanges splits = flowgraph::chronological_split(dataset);
  const auto train_windows = flowgraph::assemble_windows_range(
      dataset, splits.train.begin, splits.train.end, mcfg.lookback);
  const auto val_windows = flowgraph::assemble_windows_range(
      dataset, splits.val.begin, splits.val.end, mcfg.lookback);
  const TargetScaler scaler = fit_target_scaler(window_targets(train_windows));
  model::FeatureCache features(dataset);
  return train_on_windows(mcfg, tcfg, model::init_params(mcfg, tcfg.seed),
                          train_windows, val_windows, scaler, features);
}

double evaluate(const model::ModelConfig& mcfg, const model::ModelParams& params,
                const flowgraph::Dataset& dataset,
                const flowgraph::FrameRange& range, const TargetScaler& scaler) {
  const auto windows = flowgraph::assemble_windows_range(
      dataset, range.begin, range.end, mcfg.lookback);
  if (windows.empty()) {
    throw ValidationError("evaluate: range yields no windows");
  }
  model::FeatureCache features(dataset);
  const std::vector<double> preds =
      predict_windows(mcfg, params, windows, features);
  std::vector<double> targets_scaled;
  targets_scaled.reserve(windows.size());
  for (const auto& w : windows) targets_scaled.push_back(scaler.apply(w.target));
  return rmse(targets_scaled, preds);
}

void write_history_csv(const std::string& path,
                       const std::vector<EpochStats>& history) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << "epoch,train_loss,val_rmse\n";
  char buf[96];
  for (const EpochStats& e : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", e.epoch, e.train_loss,
                  e.val_rmse);
    out << buf;
  }
}

}  // namespace flowsense::training
