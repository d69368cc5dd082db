#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "flowsense/flowgraph.hpp"
#include "flowsense/model.hpp"
#include "flowsense/training.hpp"

namespace flowsense::transfer {

// Partial retraining policy: how many of the earliest target-domain training
// windows to use and which parameter groups stay frozen. n_points == 0 means
// no optimization at all (zero-shot).
struct FinetunePolicy {
  int n_points = 0;
  std::set<std::string> frozen_groups = {model::kGroupGnn};
  double learning_rate = 1e-4;
  int max_epochs = 200;
  int patience = 10;
  int batch_size = 64;
};

// One pretraining run per seed on the source dataset.
std::vector<model::ModelParams> pretrain(const model::ModelConfig& mcfg,
                                         const training::TrainConfig& base,
                                         const flowgraph::Dataset& source,
                                         const std::vector<uint64_t>& seeds);

// Target-domain test RMSE with no parameter update, normalized by the
// target's own training-split statistics.
double zero_shot_eval(const model::ModelConfig& mcfg,
                      const model::ModelParams& checkpoint,
                      const flowgraph::Dataset& target);

// Fine-tunes a checkpoint on the chronological prefix of the target training
// split, early-stopped on the target validation split. Frozen groups come
// back bit-identical.
model::ModelParams finetune(const model::ModelConfig& mcfg,
                            const model::ModelParams& checkpoint,
                            const flowgraph::Dataset& target,
                            const FinetunePolicy& policy, uint64_t seed);

struct ExperimentConfig {
  model::ModelConfig model;
  training::TrainConfig pretrain_train;  // lr 1e-3 by default
  FinetunePolicy finetune_base;          // lr 1e-4 by default
  double scratch_learning_rate = 1e-3;
  std::vector<int> n_grid = {0, 1, 11, 21, 31, 41, 51};
  int n_seeds = 9;
  uint64_t seed_base = 1;
  int jobs = 1;

  std::vector<uint64_t> seeds() const;
};

struct CellResult {
  int n_points = 0;
  uint64_t seed = 0;
  std::string arm;  // "pretrained" or "scratch"
  double test_rmse = 0.0;
  int epochs_run = 0;
  // Chronology witnesses for the leakage guard.
  double last_train_time_s = -1.0;  // newest frame time seen by training
  double first_test_time_s = -1.0;  // oldest frame time of the test split
};

struct Aggregate {
  int n_points = 0;
  double pretrained_mean = 0.0;
  double pretrained_std = 0.0;
  double scratch_mean = 0.0;
  double scratch_std = 0.0;
  // Table-1-style reductions under both readings of the aggregation order.
  double reduction_per_seed_avg = 0.0;
  double reduction_of_means = 0.0;
};

struct TransferReport {
  std::vector<CellResult> cells;      // sorted by (n, arm, seed)
  std::vector<Aggregate> aggregates;  // sorted by n
};

// Full grid: for every (n, seed): fine-tuned-from-pretrained and
// trained-from-scratch test RMSE on the target. Persists pretrain
// checkpoints and per-cell results under out_dir as it goes; existing files
// are reused, so an interrupted run resumes where it stopped. Also emits
// raw.csv, aggregate.csv, summary.json and the prediction series for the
// first seed (series.csv: t, y, zero-shot, fine-tuned at max n).
TransferReport run_experiment(const flowgraph::Dataset& source,
                              const flowgraph::Dataset& target,
                              const ExperimentConfig& cfg,
                              const std::string& out_dir);

// Pure aggregation over completed cells (exposed for report tooling).
std::vector<Aggregate> aggregate_cells(const std::vector<CellResult>& cells);

std::vector<CellResult> load_cells(const std::string& cells_dir);
void write_raw_csv(const std::string& path, const std::vector<CellResult>& cells);
void write_aggregate_csv(const std::string& path,
                         const std::vector<Aggregate>& aggregates);

}  // namespace flowsense::transfer
