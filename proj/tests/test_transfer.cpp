#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "flowsense/errors.hpp"
#include "flowsense/model.hpp"
#include "flowsense/scenario.hpp"
#include "flowsense/training.hpp"
#include "flowsense/transfer.hpp"

using namespace flowsense;
namespace fs = std::filesystem;
using flowgraph::Dataset;
using model::ModelConfig;
using model::ModelParams;
using namespace flowsense::transfer;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.hidden_dim = 8;
  cfg.embed_dim = 8;
  cfg.mp_rounds = 1;
  cfg.tf_layers = 1;
  cfg.tf_heads = 2;
  cfg.tf_model_dim = 8;
  cfg.lookback = 3;
  cfg.head_hidden = 8;
  return cfg;
}

const Dataset& source_dataset() {
  static const Dataset ds = [] {
    procsim::ScenarioConfig cfg;
    cfg.duration_hours = 4.0;
    cfg.seed = 101;
    return procsim::run_scenario(procsim::Variant::kA, cfg);
  }();
  return ds;
}

const Dataset& target_dataset() {
  static const Dataset ds = [] {
    procsim::ScenarioConfig cfg;
    cfg.duration_hours = 2.0;
    cfg.seed = 202;
    return procsim::run_scenario(procsim::Variant::kB, cfg);
  }();
  return ds;
}

training::TrainConfig quick_train() {
  training::TrainConfig tcfg;
  tcfg.max_epochs = 4;
  tcfg.patience = 4;
  return tcfg;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (size_t i = 0; i < a.entries.size(); ++i) {
    if (a.entries[i].name != b.entries[i].name) return false;
    if (!(a.entries[i].tensor == b.entries[i].tensor)) return false;
  }
  return true;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("finetune with zero points returns the checkpoint unchanged") {
  const ModelConfig cfg = tiny_config();
  const ModelParams checkpoint = model::init_params(cfg, 5);
  FinetunePolicy policy;
  policy.n_points = 0;
  const ModelParams out =
      finetune(cfg, checkpoint, target_dataset(), policy, 5);
  CHECK(params_equal(out, checkpoint));
}

TEST_CASE("frozen groups come back bit-identical from finetune") {
  const ModelConfig cfg = tiny_config();
  const ModelParams checkpoint = model::init_params(cfg, 6);
  FinetunePolicy policy;
  policy.n_points = 8;
  policy.max_epochs = 3;
  policy.patience = 3;
  const ModelParams tuned =
      finetune(cfg, checkpoint, target_dataset(), policy, 6);
  bool temporal_or_head_changed = false;
  for (size_t i = 0; i < tuned.entries.size(); ++i) {
    const auto& before = checkpoint.entries[i];
    const auto& after = tuned.entries[i];
    REQUIRE(before.name == after.name);
    if (before.group == model::kGroupGnn || before.name == "tf.pos_enc") {
      CHECK_MESSAGE(before.tensor == after.tensor, before.name);
    } else if (!(before.tensor == after.tensor)) {
      temporal_or_head_changed = true;
    }
  }
  CHECK(temporal_or_head_changed);
}

TEST_CASE("finetune rejects more points than the training split holds") {
  const ModelConfig cfg = tiny_config();
  const ModelParams checkpoint = model::init_params(cfg, 7);
  FinetunePolicy policy;
  policy.n_points = 100000;
  CHECK_THROWS_AS(finetune(cfg, checkpoint, target_dataset(), policy, 7),
                  ValidationError);
}

TEST_CASE("pretrain: per-seed checkpoints are distinct and reproducible") {
  const ModelConfig cfg = tiny_config();
  const std::vector<uint64_t> seeds{11, 12};
  const auto first = pretrain(cfg, quick_train(), source_dataset(), seeds);
  const auto second = pretrain(cfg, quick_train(), source_dataset(), seeds);
  REQUIRE(first.size() == 2);
  CHECK(params_equal(first[0], second[0]));
  CHECK(params_equal(first[1], second[1]));
  CHECK(!params_equal(first[0], first[1]));
}

TEST_CASE("converged pretraining beats the untrained initialization on val") {
  const ModelConfig cfg = tiny_config();
  procsim::ScenarioConfig scfg;
  scfg.duration_hours = 10.0;
  scfg.seed = 303;
  const Dataset ds = procsim::run_scenario(procsim::Variant::kA, scfg);

  training::TrainConfig tcfg;
  tcfg.max_epochs = 30;
  tcfg.patience = 30;
  tcfg.full_batch_threshold = 0;  // mini-batch steps even at this size
  const std::vector<uint64_t> seeds{11, 12};
  const auto checkpoints = pretrain(cfg, tcfg, ds, seeds);

  const auto splits = flowgraph::chronological_split(ds);
  const auto windows = flowgraph::assemble_windows_range(
      ds, splits.train.begin, splits.train.end, cfg.lookback);
  std::vector<double> targets;
  for (const auto& w : windows) targets.push_back(w.target);
  const auto scaler = training::fit_target_scaler(targets);
  for (size_t i = 0; i < seeds.size(); ++i) {
    const double trained =
        training::evaluate(cfg, checkpoints[i], ds, splits.val, scaler);
    const double untrained = training::evaluate(
        cfg, model::init_params(cfg, seeds[i]), ds, splits.val, scaler);
    CHECK(std::isfinite(trained));
    CHECK(trained < untrained);
  }
}

TEST_CASE("zero-shot on the source test split equals training evaluate") {
  const ModelConfig cfg = tiny_config();
  const auto checkpoints =
      pretrain(cfg, quick_train(), source_dataset(), {21});
  const auto splits = flowgraph::chronological_split(source_dataset());
  const auto windows = flowgraph::assemble_windows_range(
      source_dataset(), splits.train.begin, splits.train.end, cfg.lookback);
  std::vector<double> targets;
  for (const auto& w : windows) targets.push_back(w.target);
  const auto scaler = training::fit_target_scaler(targets);
  CHECK(zero_shot_eval(cfg, checkpoints[0], source_dataset()) ==
        training::evaluate(cfg, checkpoints[0], source_dataset(), splits.test,
                           scaler));
}

TEST_CASE("aggregate_cells applies both reduction formulas") {
  std::vector<CellResult> cells;
  cells.push_back({5, 1, "pretrained", 0.6, 1, 0, 1});
  cells.push_back({5, 2, "pretrained", 0.8, 1, 0, 1});
  cells.push_back({5, 1, "scratch", 0.8, 1, 0, 1});
  cells.push_back({5, 2, "scratch", 1.2, 1, 0, 1});
  const auto aggs = aggregate_cells(cells);
  REQUIRE(aggs.size() == 1);
  const auto& a = aggs[0];
  CHECK(a.n_points == 5);
  CHECK(a.pretrained_mean == doctest::Approx(0.7));
  CHECK(a.scratch_mean == doctest::Approx(1.0));
  CHECK(a.pretrained_std == doctest::Approx(0.1));
  CHECK(a.scratch_std == doctest::Approx(0.2));
  // Per-seed: (0.8-0.6)/0.8 = 25%, (1.2-0.8)/1.2 = 33.33%; averaged 29.17%.
  CHECK(a.reduction_per_seed_avg == doctest::Approx(29.166666).epsilon(1e-4));
  // Of means: (1.0-0.7)/1.0 = 30%.
  CHECK(a.reduction_of_means == doctest::Approx(30.0).epsilon(1e-9));

  cells.pop_back();
  CHECK_THROWS_AS(aggregate_cells(cells), ValidationError);
}

TEST_CASE("run_experiment: grid shape, determinism, resume") {
  const fs::path dir1 = "test_experiment_run1";
  const fs::path dir2 = "test_experiment_run2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  ExperimentConfig xcfg;
  xcfg.model = tiny_config();
  xcfg.pretrain_train = quick_train();
  xcfg.finetune_base.max_epochs = 3;
  xcfg.finetune_base.patience = 3;
  xcfg.n_grid = {0, 2, 4};
  xcfg.n_seeds = 2;
  xcfg.seed_base = 31;
  xcfg.jobs = 2;

  const TransferReport report =
      run_experiment(source_dataset(), target_dataset(), xcfg, dir1.string());
  CHECK(report.cells.size() == 3 * 2 * 2);
  CHECK(report.aggregates.size() == 3);
  for (const auto& c : report.cells) {
    CHECK(std::isfinite(c.test_rmse));
    CHECK(c.first_test_time_s > 0.0);
    // Nothing trained on ever reaches into the test split.
    CHECK(c.last_train_time_s < c.first_test_time_s);
  }
  // Both arms of a cell see the same windows and the same test split.
  for (const auto& c : report.cells) {
    for (const auto& other : report.cells) {
      if (c.n_points == other.n_points && c.seed == other.seed) {
        CHECK(c.last_train_time_s == other.last_train_time_s);
        CHECK(c.first_test_time_s == other.first_test_time_s);
      }
    }
  }
  for (const char* artifact :
       {"raw.csv", "aggregate.csv", "summary.json", "series.csv"}) {
    CHECK(fs::exists(dir1 / artifact));
  }
  {
    std::ifstream raw(dir1 / "raw.csv");
    std::string line;
    int rows = -1;
    while (std::getline(raw, line)) ++rows;
    CHECK(rows == 12);
  }

  // A second run from scratch is byte-identical.
  run_experiment(source_dataset(), target_dataset(), xcfg, dir2.string());
  for (const char* artifact :
       {"raw.csv", "aggregate.csv", "summary.json", "series.csv"}) {
    CHECK(slurp(dir1 / artifact) == slurp(dir2 / artifact));
  }

  // Resume: delete two cells and the aggregate; rerun restores identical
  // bytes and keeps the untouched cells.
  fs::remove(dir1 / "cells" / "n2_seed31_pretrained.json");
  fs::remove(dir1 / "cells" / "n4_seed32_scratch.json");
  fs::remove(dir1 / "raw.csv");
  fs::remove(dir1 / "aggregate.csv");
  run_experiment(source_dataset(), target_dataset(), xcfg, dir1.string());
  for (const char* artifact : {"raw.csv", "aggregate.csv", "summary.json"}) {
    CHECK(slurp(dir1 / artifact) == slurp(dir2 / artifact));
  }

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("experiment seeds derive from the base") {
  ExperimentConfig xcfg;
  xcfg.n_seeds = 3;
  xcfg.seed_base = 7;
  const auto seeds = xcfg.seeds();
  CHECK(seeds == std::vector<uint64_t>{7, 8, 9});
}
