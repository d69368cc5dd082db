#include "flowsense/transfer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "flowsense/errors.hpp"

namespace flowsense::transfer {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::vector<uint64_t> ExperimentConfig::seeds() const {
  std::vector<uint64_t> out;
  for (int i = 0; i < n_seeds; ++i) out.push_back(seed_base + static_cast<uint64_t>(i));
  return out;
}

std::vector<model::ModelParams> pretrain(const model::ModelConfig& mcfg,
                                         const training::TrainConfig& base,
                                         const flowgraph::Dataset& source,
                                         const std::vector<uint64_t>& seeds) {
  std::vector<model::ModelParams> out;
  out.reserve(seeds.size());
  for (uint64_t seed : seeds) {
    training::TrainConfig tcfg = base;
    tcfg.seed = seed;
    out.push_back(training::train(mcfg, tcfg, source).params);
  }
  return out;
}

double zero_shot_eval(const model::ModelConfig& mcfg,
                      const model::ModelParams& checkpoint,
                      const flowgraph::Dataset& target) {
  const auto splits = flowgraph::chronological_split(target);
  const auto train_windows = flowgraph::assemble_windows_range(
      target, splits.train.begin, splits.train.end, mcfg.lookback);
  std::vector<double> targets;
  for (const auto& w : train_windows) targets.push_back(w.target);
  const training::TargetScaler scaler = training::fit_target_scaler(targets);
  return training::evaluate(mcfg, checkpoint, target, splits.test, scaler);
}

namespace {

struct TargetContext {
  flowgraph::SplitRanges splits;
  std::vector<flowgraph::GraphSample> train_windows;
  std::vector<flowgraph::GraphSample> val_windows;
  training::TargetScaler scaler;
};

TargetContext make_target_context(const flowgraph::Dataset& target,
                                  int lookback) {
  TargetContext ctx;
  ctx.splits = flowgraph::chronological_split(target);
  ctx.train_windows = flowgraph::assemble_windows_range(
      target, ctx.splits.train.begin, ctx.splits.train.end, lookback);
  ctx.val_windows = flowgraph::assemble_windows_range(
      target, ctx.splits.val.begin, ctx.splits.val.end, lookback);
  std::vector<double> targets;
  for (const auto& w : ctx.train_windows) targets.push_back(w.target);
  ctx.scaler = training::fit_target_scaler(targets);
  return ctx;
}

std::vector<flowgraph::GraphSample> earliest_windows(
    const std::vector<flowgraph::GraphSample>& windows, int n) {
  if (n > static_cast<int>(windows.size())) {
    throw ValidationError("requested " + std::to_string(n) +
                          " fine-tune windows but only " +
                          std::to_string(windows.size()) + " are available");
  }
  return {windows.begin(), windows.begin() + n};
}

}  // namespace

model::ModelParams finetune(const model::ModelConfig& mcfg,
                            const model::ModelParams& checkpoint,
                            const flowgraph::Dataset& target,
                            const FinetunePolicy& policy, uint64_t seed) {
  if (policy.n_points < 0) throw ValidationError("n_points must be >= 0");
  if (policy.n_points == 0) return checkpoint;  // zero-shot: no optimization

  TargetContext ctx = make_target_context(target, mcfg.lookback);
  const auto subset = earliest_windows(ctx.train_windows, policy.n_points);

  model::ModelParams initial = checkpoint;
  std::set<std::string> trainable;
  for (const std::string& g : initial.group_names()) {
    if (policy.frozen_groups.count(g) == 0) trainable.insert(g);
  }
  initial.set_trainable_groups(trainable);

  training::TrainConfig tcfg;
  tcfg.learning_rate = policy.learning_rate;
  tcfg.max_epochs = policy.max_epochs;
  tcfg.patience = policy.patience;
  tcfg.batch_size = policy.batch_size;
  tcfg.seed = seed;

  model::FeatureCache features(target);
  training::TrainResult result = training::train_on_windows(
      mcfg, tcfg, std::move(initial), subset, ctx.val_windows, ctx.scaler,
      features);
  return result.params;
}

namespace {

std::string cell_filename(int n, uint64_t seed, const std::string& arm) {
  return "n" + std::to_string(n) + "_seed" + std::to_string(seed) + "_" + arm +
         ".json";
}

void write_cell(const fs::path& path, const CellResult& cell) {
  ordered_json j;
  j["n_points"] = cell.n_points;
  j["seed"] = cell.seed;
  j["arm"] = cell.arm;
  j["test_rmse"] = cell.test_rmse;
  j["epochs_run"] = cell.epochs_run;
  j["last_train_time_s"] = cell.last_train_time_s;
  j["first_test_time_s"] = cell.first_test_time_s;
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write cell file: " + tmp.string());
    out << j.dump(1, '\t') << "\n";
  }
  fs::rename(tmp, path);
}

CellResult read_cell(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read cell file: " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed cell file " + path.string() + ": " +
                          e.what());
  }
  CellResult cell;
  cell.n_points = j.at("n_points").get<int>();
  cell.seed = j.at("seed").get<uint64_t>();
  cell.arm = j.at("arm").get<std::string>();
  cell.test_rmse = j.at("test_rmse").get<double>();
  cell.epochs_run = j.value("epochs_run", 0);
  cell.last_train_time_s = j.value("last_train_time_s", -1.0);
  cell.first_test_time_s = j.value("first_test_time_s", -1.0);
  return cell;
}

void sort_cells(std::vector<CellResult>& cells) {
  std::sort(cells.begin(), cells.end(),
            [](const CellResult& a, const CellResult& b) {
              if (a.n_points != b.n_points) return a.n_points < b.n_points;
              if (a.arm != b.arm) return a.arm < b.arm;
              return a.seed < b.seed;
            });
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double pop_std(const std::vector<double>& xs, double mean) {
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<Aggregate> aggregate_cells(const std::vector<CellResult>& cells) {
  std::vector<int> ns;
  for (const CellResult& c : cells) {
    if (std::find(ns.begin(), ns.end(), c.n_points) == ns.end()) {
      ns.push_back(c.n_points);
    }
  }
  std::sort(ns.begin(), ns.end());
  std::vector<Aggregate> out;
  for (int n : ns) {
    std::map<uint64_t, double> pre, scratch;
    for (const CellResult& c : cells) {
      if (c.n_points != n) continue;
      if (c.arm == "pretrained") pre[c.seed] = c.test_rmse;
      if (c.arm == "scratch") scratch[c.seed] = c.test_rmse;
    }
    if (pre.size() != scratch.size() || pre.empty()) {
      throw ValidationError("incomplete cell grid at n=" + std::to_string(n));
    }
    Aggregate agg;
    agg.n_points = n;
    std::vector<double> pre_v, scratch_v, reductions;
    for (const auto& [seed, rmse_pre] : pre) {
      auto it = scratch.find(seed);
      if (it == scratch.end()) {
        throw ValidationError("missing scratch cell for seed " +
                              std::to_string(seed) + " at n=" +
                              std::to_string(n));
      }
      pre_v.push_back(rmse_pre);
      scratch_v.push_back(it->second);
      if (it->second > 0.0) {
        reductions.push_back((it->second - rmse_pre) / it->second * 100.0);
      }
    }
    agg.pretrained_mean = mean_of(pre_v);
    agg.pretrained_std = pop_std(pre_v, agg.pretrained_mean);
    agg.scratch_mean = mean_of(scratch_v);
    agg.scratch_std = pop_std(scratch_v, agg.scratch_mean);
    agg.reduction_per_seed_avg = reductions.empty() ? 0.0 : mean_of(reductions);
    agg.reduction_of_means =
        agg.scratch_mean > 0.0
            ? (agg.scratch_mean - agg.pretrained_mean) / agg.scratch_mean * 100.0
            : 0.0;
    out.push_back(agg);
  }
  return out;
}

std::vector<CellResult> load_cells(const std::string& cells_dir) {
  std::vector<CellResult> cells;
  if (!fs::exists(cells_dir)) return cells;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(cells_dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) cells.push_back(read_cell(f));
  sort_cells(cells);
  return cells;
}

void write_raw_csv(const std::string& path,
                   const std::vector<CellResult>& cells) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << "n,seed,arm,rmse\n";
  for (const CellResult& c : cells) {
    out << c.n_points << "," << c.seed << "," << c.arm << ","
        << fmt_double(c.test_rmse) << "\n";
  }
}

void write_aggregate_csv(const std::string& path,
                         const std::vector<Aggregate>& aggregates) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << "n,pretrained_mean,pretrained_std,scratch_mean,scratch_std,"
         "reduction_per_seed_avg,reduction_of_means\n";
  for (const Aggregate& a : aggregates) {
    out << a.n_points << "," << fmt_double(a.pretrained_mean) << ","
        << fmt_double(a.pretrained_std) << "," << fmt_double(a.scratch_mean)
        << "," << fmt_double(a.scratch_std) << ","
        << fmt_double(a.reduction_per_seed_avg) << ","
        << fmt_double(a.reduction_of_means) << "\n";
  }
}

namespace {

// Writes series.csv: ground truth vs zero-shot and max-n fine-tuned
// predictions over the target test split, in raw target units.
void write_series_csv(const fs::path& path, const model::ModelConfig& mcfg,
                      const model::ModelParams& pretrained,
                      const model::ModelParams& finetuned,
                      const flowgraph::Dataset& target,
                      const TargetContext& ctx) {
  const auto test_windows = flowgraph::assemble_windows_range(
      target, ctx.splits.test.begin, ctx.splits.test.end, mcfg.lookback);
  const auto zero_series =
      model::predict_series(mcfg, pretrained, target, ctx.splits.test);
  const auto ft_series =
      model::predict_series(mcfg, finetuned, target, ctx.splits.test);
  if (zero_series.size() != test_windows.size() ||
      ft_series.size() != test_windows.size()) {
    throw ValidationError("prediction series length mismatch");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  out << "t,y,y_hat_zero_shot,y_hat_finetuned\n";
  for (size_t i = 0; i < test_windows.size(); ++i) {
    out << fmt_double(zero_series[i].first) << ","
        << fmt_double(test_windows[i].target) << ","
        << fmt_double(ctx.scaler.invert(zero_series[i].second)) << ","
        << fmt_double(ctx.scaler.invert(ft_series[i].second)) << "\n";
  }
}

void run_tasks(std::vector<std::function<void()>>& tasks, int jobs) {
  if (jobs <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        tasks[i]();
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min<int>(jobs, static_cast<int>(tasks.size()));
  pool.reserve(static_cast<size_t>(n_threads));
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

TransferReport run_experiment(const flowgraph::Dataset& source,
                              const flowgraph::Dataset& target,
                              const ExperimentConfig& cfg,
                              const std::string& out_dir) {
  cfg.model.validate();
  if (cfg.n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
  if (cfg.n_grid.empty()) throw ConfigError("n_grid must not be empty");

  const fs::path out(out_dir);
  const fs::path cells_dir = out / "cells";
  const fs::path ckpt_dir = out / "checkpoints";
  fs::create_directories(cells_dir);
  fs::create_directories(ckpt_dir);

  const std::vector<uint64_t> seeds = cfg.seeds();
  const TargetContext ctx = make_target_context(target, cfg.model.lookback);
  const double first_test_time =
      target.frames[static_cast<size_t>(ctx.splits.test.begin)].time;
  const int max_n = *std::max_element(cfg.n_grid.begin(), cfg.n_grid.end());

  // Phase 1: one pretrained checkpoint per seed, reused from disk when
  // present.
  std::vector<model::ModelParams> checkpoints(seeds.size());
  {
    std::vector<std::function<void()>> tasks;
    for (size_t i = 0; i < seeds.size(); ++i) {
      tasks.push_back([&, i]() {
        const fs::path path =
            ckpt_dir / ("pretrain_seed" + std::to_string(seeds[i]) + ".ckpt");
        if (fs::exists(path)) {
          auto [loaded_cfg, loaded] = model::load_model(path.string());
          (void)loaded_cfg;
          checkpoints[i] = std::move(loaded);
          return;
        }
        training::TrainConfig tcfg = cfg.pretrain_train;
        tcfg.seed = seeds[i];
        training::TrainResult result = training::train(cfg.model, tcfg, source);
        const fs::path tmp = path.string() + ".tmp";
        model::save_model(tmp.string(), cfg.model, result.params);
        fs::rename(tmp, path);
        checkpoints[i] = std::move(result.params);
      });
    }
    run_tasks(tasks, cfg.jobs);
  }

  // Phase 2: the (n, seed, arm) grid. Every cell lands on disk as it
  // completes; existing cells are skipped.
  {
    std::vector<std::function<void()>> tasks;
    for (int n : cfg.n_grid) {
      for (size_t i = 0; i < seeds.size(); ++i) {
        const uint64_t seed = seeds[i];
        tasks.push_back([&, n, i, seed]() {
          const fs::path path = cells_dir / cell_filename(n, seed, "pretrained");
          if (fs::exists(path)) return;
          CellResult cell;
          cell.n_points = n;
          cell.seed = seed;
          cell.arm = "pretrained";
          cell.first_test_time_s = first_test_time;
          FinetunePolicy policy = cfg.finetune_base;
          policy.n_points = n;
          if (n == 0) {
            cell.test_rmse = training::evaluate(cfg.model, checkpoints[i],
                                                target, ctx.splits.test,
                                                ctx.scaler);
            cell.epochs_run = 0;
            cell.last_train_time_s = -1.0;
          } else {
            const model::ModelParams tuned =
                finetune(cfg.model, checkpoints[i], target, policy, seed);
            cell.test_rmse = training::evaluate(cfg.model, tuned, target,
                                                ctx.splits.test, ctx.scaler);
            cell.last_train_time_s =
                ctx.train_windows[static_cast<size_t>(n - 1)]
                    .frame(cfg.model.lookback - 1)
                    .time;
            if (n == max_n && i == 0) {
              const fs::path ft_path = ckpt_dir / "finetuned_maxn_seed0.ckpt";
              const fs::path tmp = ft_path.string() + ".tmp";
              model::save_model(tmp.string(), cfg.model, tuned);
              fs::rename(tmp, ft_path);
            }
          }
          write_cell(path, cell);
        });
        tasks.push_back([&, n, seed]() {
          const fs::path path = cells_dir / cell_filename(n, seed, "scratch");
          if (fs::exists(path)) return;
          CellResult cell;
          cell.n_points = n;
          cell.seed = seed;
          cell.arm = "scratch";
          cell.first_test_time_s = first_test_time;
          model::ModelParams params = model::init_params(cfg.model, seed);
          if (n == 0) {
            // No pretraining to fall back on: the scratch arm at n = 0 is
            // the untrained initialization.
            cell.test_rmse = training::evaluate(cfg.model, params, target,
                                                ctx.splits.test, ctx.scaler);
            cell.epochs_run = 0;
            cell.last_train_time_s = -1.0;
          } else {
            training::TrainConfig tcfg;
            tcfg.learning_rate = cfg.scratch_learning_rate;
            tcfg.max_epochs = cfg.finetune_base.max_epochs;
            tcfg.patience = cfg.finetune_base.patience;
            tcfg.batch_size = cfg.finetune_base.batch_size;
            tcfg.seed = seed;
            const auto subset = earliest_windows(ctx.train_windows, n);
            model::FeatureCache features(target);
            training::TrainResult result = training::train_on_windows(
                cfg.model, tcfg, std::move(params), subset, ctx.val_windows,
                ctx.scaler, features);
            cell.epochs_run = static_cast<int>(result.history.size());
            cell.test_rmse = training::evaluate(cfg.model, result.params,
                                                target, ctx.splits.test,
                                                ctx.scaler);
            cell.last_train_time_s =
                ctx.train_windows[static_cast<size_t>(n - 1)]
                    .frame(cfg.model.lookback - 1)
                    .time;
          }
          write_cell(path, cell);
        });
      }
    }
    run_tasks(tasks, cfg.jobs);
  }

  // Phase 3: aggregation and presentation artifacts.
  TransferReport report;
  report.cells = load_cells(cells_dir.string());
  report.aggregates = aggregate_cells(report.cells);
  write_raw_csv((out / "raw.csv").string(), report.cells);
  write_aggregate_csv((out / "aggregate.csv").string(), report.aggregates);

  {
    model::ModelParams finetuned;
    const fs::path ft_path = ckpt_dir / "finetuned_maxn_seed0.ckpt";
    if (max_n == 0) {
      finetuned = checkpoints[0];
    } else if (fs::exists(ft_path)) {
      finetuned = model::load_model(ft_path.string()).second;
    } else {
      FinetunePolicy policy = cfg.finetune_base;
      policy.n_points = max_n;
      finetuned = finetune(cfg.model, checkpoints[0], target, policy, seeds[0]);
    }
    write_series_csv(out / "series.csv", cfg.model, checkpoints[0], finetuned,
                     target, ctx);
  }

  ordered_json summary;
  summary["n_grid"] = cfg.n_grid;
  summary["n_seeds"] = cfg.n_seeds;
  summary["seed_base"] = cfg.seed_base;
  ordered_json rows = ordered_json::array();
  for (const Aggregate& a : report.aggregates) {
    rows.push_back({{"n", a.n_points},
                    {"pretrained_mean", a.pretrained_mean},
                    {"pretrained_std", a.pretrained_std},
                    {"scratch_mean", a.scratch_mean},
                    {"scratch_std", a.scratch_std},
                    {"reduction_per_seed_avg", a.reduction_per_seed_avg},
                    {"reduction_of_means", a.reduction_of_means}});
  }
  summary["aggregates"] = std::move(rows);
  std::ofstream sj(out / "summary.json", std::ios::binary | std::ios::trunc);
  if (!sj) throw ValidationError("cannot write summary.json");
  sj << summary.dump(1, '\t') << "\n";

  return report;
}

}  // namespace flowsense::transfer
