// flowsense: simulate the ammonia loops, train the soft-sensor model and run
// the A->B transfer experiment grid from one binary.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowsense/config_file.hpp"
#include "flowsense/dataset_io.hpp"
#include "flowsense/errors.hpp"
#include "flowsense/hash.hpp"
#include "flowsense/model.hpp"
#include "flowsense/procsim.hpp"
#include "flowsense/scenario.hpp"
#include "flowsense/training.hpp"
#include "flowsense/transfer.hpp"

namespace fs = std::filesystem;
using flowsense::ConfigError;
using flowsense::ConfigMap;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* description;
};

const std::vector<ConfigKey>& model_keys() {
  static const std::vector<ConfigKey> keys = {
      {"hidden_dim", "64", "GNN node state width"},
      {"mp_rounds", "2", "message-passing rounds"},
      {"embed_dim", "64", "flowsheet embedding width (= hidden_dim)"},
      {"tf_layers", "2", "transformer encoder layers"},
      {"tf_heads", "4", "attention heads"},
      {"tf_model_dim", "64", "transformer model width"},
      {"lookback", "5", "frames per window"},
      {"head_hidden", "64", "head MLP hidden width"},
  };
  return keys;
}

const std::vector<ConfigKey>& simulate_keys() {
  static const std::vector<ConfigKey> keys = {
      {"duration_hours", "80", "sampled operation span"},
      {"sample_interval_s", "36", "sensor sampling period"},
      {"integration_step_s", "3.6", "explicit integration step"},
      {"perturb_min", "0.01", "smallest setpoint deviation fraction"},
      {"perturb_max", "0.20", "largest setpoint deviation fraction"},
      {"steady_tol", "5e-4", "steady-state relative band"},
      {"steady_hold_s", "900", "seconds the band must hold"},
      {"max_episode_s", "7200", "forced transition age"},
      {"warmup_max_s", "43200", "cap on the unsampled warmup"},
      {"split", "0.8,0.1,0.1", "train/val/test fractions"},
  };
  return keys;
}

const std::vector<ConfigKey>& train_keys() {
  static const std::vector<ConfigKey> keys = {
      {"learning_rate", "1e-3", "Adam step size"},
      {"max_epochs", "200", "epoch cap"},
      {"batch_size", "64", "mini-batch size beyond the full-batch threshold"},
      {"full_batch_threshold", "1024", "window count trained as one batch"},
      {"patience", "10", "epochs without val improvement before stopping"},
  };
  return keys;
}

const std::vector<ConfigKey>& experiment_keys() {
  static const std::vector<ConfigKey> keys = {
      {"pretrain_lr", "1e-3", "source-domain learning rate"},
      {"pretrain_max_epochs", "200", "source-domain epoch cap"},
      {"pretrain_patience", "10", "source-domain early-stop patience"},
      {"pretrain_batch_size", "64", "source-domain mini-batch size"},
      {"full_batch_threshold", "1024", "window count trained as one batch"},
      {"finetune_lr", "1e-4", "target-domain learning rate"},
      {"finetune_max_epochs", "200", "target-domain epoch cap"},
      {"finetune_patience", "10", "target-domain early-stop patience"},
      {"finetune_batch_size", "64", "target-domain mini-batch size"},
      {"scratch_lr", "1e-3", "learning rate for the from-scratch arm"},
      {"freeze", "gnn", "frozen groups while fine-tuning: gnn or none"},
      {"n_grid", "0,1,11,21,31,41,51", "fine-tune window counts"},
      {"n_seeds", "9", "seeds per grid cell"},
  };
  return keys;
}

void print_config_keys(const std::vector<const std::vector<ConfigKey>*>& blocks) {
  for (const auto* block : blocks) {
    for (const ConfigKey& k : *block) {
      std::printf("%-22s = %-18s # %s\n", k.name, k.default_value, k.description);
    }
  }
}

std::vector<std::string> known_names(
    const std::vector<const std::vector<ConfigKey>*>& blocks) {
  std::vector<std::string> names;
  for (const auto* block : blocks) {
    for (const ConfigKey& k : *block) names.push_back(k.name);
  }
  return names;
}

ConfigMap load_config(const std::string& path,
                      const std::vector<const std::vector<ConfigKey>*>& blocks) {
  ConfigMap cfg;
  if (!path.empty()) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
    cfg = ConfigMap::from_file(path);
  }
  cfg.require_known_keys(known_names(blocks));
  return cfg;
}

void require_input_file(const std::string& path, const char* what) {
  if (path.empty()) {
    throw ConfigError(std::string(what) + " path is required");
  }
  if (!fs::exists(path)) {
    throw ConfigError(std::string(what) + " not found: " + path);
  }
}

flowsense::model::ModelConfig model_config_from(const ConfigMap& cfg) {
  flowsense::model::ModelConfig m;
  m.hidden_dim = static_cast<int>(cfg.get_int("hidden_dim", m.hidden_dim));
  m.mp_rounds = static_cast<int>(cfg.get_int("mp_rounds", m.mp_rounds));
  m.embed_dim = static_cast<int>(cfg.get_int("embed_dim", m.hidden_dim));
  m.tf_layers = static_cast<int>(cfg.get_int("tf_layers", m.tf_layers));
  m.tf_heads = static_cast<int>(cfg.get_int("tf_heads", m.tf_heads));
  m.tf_model_dim = static_cast<int>(cfg.get_int("tf_model_dim", m.tf_model_dim));
  m.lookback = static_cast<int>(cfg.get_int("lookback", m.lookback));
  m.head_hidden = static_cast<int>(cfg.get_int("head_hidden", m.head_hidden));
  m.validate();
  return m;
}

flowsense::procsim::ScenarioConfig scenario_config_from(const ConfigMap& cfg,
                                                        uint64_t seed) {
  flowsense::procsim::ScenarioConfig s;
  s.duration_hours = cfg.get_double("duration_hours", s.duration_hours);
  s.sample_interval_s = cfg.get_double("sample_interval_s", s.sample_interval_s);
  s.integration_step_s =
      cfg.get_double("integration_step_s", s.integration_step_s);
  s.perturb_min_frac = cfg.get_double("perturb_min", s.perturb_min_frac);
  s.perturb_max_frac = cfg.get_double("perturb_max", s.perturb_max_frac);
  s.steady_tol = cfg.get_double("steady_tol", s.steady_tol);
  s.steady_hold_s = cfg.get_double("steady_hold_s", s.steady_hold_s);
  s.max_episode_s = cfg.get_double("max_episode_s", s.max_episode_s);
  s.warmup_max_s = cfg.get_double("warmup_max_s", s.warmup_max_s);
  s.seed = seed;
  const auto split = cfg.get_doubles("split", {0.8, 0.1, 0.1});
  if (split.size() != 3) throw ConfigError("split must have 3 fractions");
  s.split = {split[0], split[1], split[2]};
  s.validate();
  return s;
}

// Provenance record: written with status=running before the work starts,
// finalized with artifact hashes afterwards.
class Manifest {
 public:
  Manifest(const fs::path& out_dir, const std::string& command,
           const std::string& config_path, const ConfigMap& cfg,
           const std::vector<uint64_t>& seeds)
      : path_(out_dir / "manifest.json") {
    doc_["tool"] = "flowsense";
    doc_["version"] = kVersion;
    doc_["command"] = command;
    doc_["config_file"] = config_path;
    ordered_json entries = ordered_json::object();
    for (const auto& [k, v] : cfg.entries()) entries[k] = v;
    doc_["config"] = std::move(entries);
    doc_["seeds"] = seeds;
    doc_["out_dir"] = out_dir.string();
    doc_["inputs"] = ordered_json::object();
    doc_["artifacts"] = ordered_json::object();
    doc_["status"] = "running";
  }

  void add_input(const std::string& file) {
    doc_["inputs"][file] = "fnv1a64:" +
                           flowsense::hash_hex(flowsense::fnv1a64_file(file));
  }

  void write() const {
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw flowsense::ValidationError("cannot write manifest: " +
                                       path_.string());
    }
    out << doc_.dump(1, '\t') << "\n";
  }

  void finalize(const std::vector<std::string>& artifacts) {
    for (const std::string& file : artifacts) {
      doc_["artifacts"][file] =
          "fnv1a64:" + flowsense::hash_hex(flowsense::fnv1a64_file(file));
    }
    doc_["status"] = "complete";
    write();
  }

 private:
  fs::path path_;
  ordered_json doc_;
};

struct CommonArgs {
  std::string config_path;
  std::string out;
  bool print_config = false;
};

int run_simulate(const std::string& variant_name, const CommonArgs& args,
                 uint64_t seed, const std::string& export_csv,
                 bool print_constants) {
  if (args.print_config) {
    print_config_keys({&simulate_keys()});
    return 0;
  }
  if (print_constants) {
    std::printf("%s", flowsense::procsim::constants_table_text(
                          flowsense::procsim::PlantConstants{})
                          .c_str());
    return 0;
  }
  flowsense::procsim::Variant variant;
  ConfigMap cfg;
  flowsense::procsim::ScenarioConfig scenario;
  try {
    variant = flowsense::procsim::variant_from_name(variant_name);
    cfg = load_config(args.config_path, {&simulate_keys()});
    scenario = scenario_config_from(cfg, seed);
    if (args.out.empty()) throw ConfigError("--out is required");
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  try {
    const fs::path out_path(args.out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    Manifest manifest(out_path.has_parent_path() ? out_path.parent_path()
                                                 : fs::path("."),
                      "simulate", args.config_path, cfg, {seed});
    if (!args.config_path.empty()) manifest.add_input(args.config_path);
    manifest.write();

    const flowsense::flowgraph::Dataset ds =
        flowsense::procsim::run_scenario(variant, scenario);
    flowsense::flowgraph::save_dataset(ds, args.out);
    std::vector<std::string> artifacts{args.out};
    if (!export_csv.empty()) {
      flowsense::flowgraph::write_frames_csv(ds, export_csv);
      artifacts.push_back(export_csv);
    }
    manifest.finalize(artifacts);
    std::printf("wrote %zu frames to %s\n", ds.frames.size(), args.out.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int run_train(const std::string& dataset_path, const CommonArgs& args,
              uint64_t seed) {
  if (args.print_config) {
    print_config_keys({&model_keys(), &train_keys()});
    return 0;
  }
  ConfigMap cfg;
  flowsense::model::ModelConfig mcfg;
  flowsense::training::TrainConfig tcfg;
  try {
    require_input_file(dataset_path, "dataset");
    cfg = load_config(args.config_path, {&model_keys(), &train_keys()});
    mcfg = model_config_from(cfg);
    tcfg.learning_rate = cfg.get_double("learning_rate", tcfg.learning_rate);
    tcfg.max_epochs = static_cast<int>(cfg.get_int("max_epochs", tcfg.max_epochs));
    tcfg.batch_size = static_cast<int>(cfg.get_int("batch_size", tcfg.batch_size));
    tcfg.full_batch_threshold = static_cast<int>(
        cfg.get_int("full_batch_threshold", tcfg.full_batch_threshold));
    tcfg.patience = static_cast<int>(cfg.get_int("patience", tcfg.patience));
    tcfg.seed = seed;
    tcfg.validate();
    if (args.out.empty()) throw ConfigError("--out is required");
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  try {
    fs::create_directories(args.out);
    Manifest manifest(args.out, "train", args.config_path, cfg, {seed});
    manifest.add_input(dataset_path);
    if (!args.config_path.empty()) manifest.add_input(args.config_path);
    manifest.write();

    const flowsense::flowgraph::Dataset ds =
        flowsense::flowgraph::load_dataset(dataset_path);
    const flowsense::training::TrainResult result =
        flowsense::training::train(mcfg, tcfg, ds);

    const std::string ckpt = (fs::path(args.out) / "model.ckpt").string();
    const std::string history = (fs::path(args.out) / "history.csv").string();
    flowsense::model::save_model(ckpt, mcfg, result.params);
    flowsense::training::write_history_csv(history, result.history);
    manifest.finalize({ckpt, history});
    std::printf("best val RMSE %.6f at epoch %d (%zu epochs run)\n",
                result.best_val_rmse, result.best_epoch,
                result.history.size());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int run_experiment_cmd(const std::string& source_path,
                       const std::string& target_path, const CommonArgs& args,
                       uint64_t seed_base, int jobs) {
  if (args.print_config) {
    print_config_keys({&model_keys(), &experiment_keys()});
    return 0;
  }
  ConfigMap cfg;
  flowsense::transfer::ExperimentConfig xcfg;
  try {
    require_input_file(source_path, "source dataset");
    require_input_file(target_path, "target dataset");
    cfg = load_config(args.config_path, {&model_keys(), &experiment_keys()});
    xcfg.model = model_config_from(cfg);
    xcfg.pretrain_train.learning_rate = cfg.get_double("pretrain_lr", 1e-3);
    xcfg.pretrain_train.max_epochs =
        static_cast<int>(cfg.get_int("pretrain_max_epochs", 200));
    xcfg.pretrain_train.patience =
        static_cast<int>(cfg.get_int("pretrain_patience", 10));
    xcfg.pretrain_train.batch_size =
        static_cast<int>(cfg.get_int("pretrain_batch_size", 64));
    xcfg.pretrain_train.full_batch_threshold =
        static_cast<int>(cfg.get_int("full_batch_threshold", 1024));
    xcfg.finetune_base.learning_rate = cfg.get_double("finetune_lr", 1e-4);
    xcfg.finetune_base.max_epochs =
        static_cast<int>(cfg.get_int("finetune_max_epochs", 200));
    xcfg.finetune_base.patience =
        static_cast<int>(cfg.get_int("finetune_patience", 10));
    xcfg.finetune_base.batch_size =
        static_cast<int>(cfg.get_int("finetune_batch_size", 64));
    xcfg.scratch_learning_rate = cfg.get_double("scratch_lr", 1e-3);
    const std::string freeze = cfg.get_string("freeze", "gnn");
    if (freeze == "gnn") {
      xcfg.finetune_base.frozen_groups = {flowsense::model::kGroupGnn};
    } else if (freeze == "none") {
      xcfg.finetune_base.frozen_groups.clear();
    } else {
      throw ConfigError("freeze must be 'gnn' or 'none', got " + freeze);
    }
    xcfg.n_grid.clear();
    for (int64_t n : cfg.get_ints("n_grid", {0, 1, 11, 21, 31, 41, 51})) {
      if (n < 0) throw ConfigError("n_grid entries must be >= 0");
      xcfg.n_grid.push_back(static_cast<int>(n));
    }
    xcfg.n_seeds = static_cast<int>(cfg.get_int("n_seeds", 9));
    xcfg.seed_base = seed_base;
    xcfg.jobs = jobs;
    if (args.out.empty()) throw ConfigError("--out is required");
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  try {
    fs::create_directories(args.out);
    Manifest manifest(args.out, "experiment", args.config_path, cfg,
                      xcfg.seeds());
    manifest.add_input(source_path);
    manifest.add_input(target_path);
    if (!args.config_path.empty()) manifest.add_input(args.config_path);
    manifest.write();

    const auto source = flowsense::flowgraph::load_dataset(source_path);
    const auto target = flowsense::flowgraph::load_dataset(target_path);
    const flowsense::transfer::TransferReport report =
        flowsense::transfer::run_experiment(source, target, xcfg, args.out);

    manifest.finalize({(fs::path(args.out) / "raw.csv").string(),
                       (fs::path(args.out) / "aggregate.csv").string(),
                       (fs::path(args.out) / "summary.json").string(),
                       (fs::path(args.out) / "series.csv").string()});
    std::printf("%zu cells aggregated over %zu n-values\n",
                report.cells.size(), report.aggregates.size());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int run_report(const std::string& report_dir, const std::string& out_dir_arg) {
  std::vector<flowsense::transfer::CellResult> cells;
  ordered_json summary;
  try {
    require_input_file(report_dir, "experiment directory");
    const fs::path summary_path = fs::path(report_dir) / "summary.json";
    require_input_file(summary_path.string(), "summary.json");
    std::ifstream in(summary_path);
    summary = ordered_json::parse(in);

    cells = flowsense::transfer::load_cells(
        (fs::path(report_dir) / "cells").string());
    // Every (n, seed, arm) combination declared by the run must be present.
    std::vector<std::string> missing;
    const auto n_grid = summary.at("n_grid").get<std::vector<int>>();
    const int n_seeds = summary.at("n_seeds").get<int>();
    const uint64_t seed_base = summary.at("seed_base").get<uint64_t>();
    for (int n : n_grid) {
      for (int i = 0; i < n_seeds; ++i) {
        for (const char* arm : {"pretrained", "scratch"}) {
          const uint64_t seed = seed_base + static_cast<uint64_t>(i);
          const bool found =
              std::any_of(cells.begin(), cells.end(), [&](const auto& c) {
                return c.n_points == n && c.seed == seed && c.arm == arm;
              });
          if (!found) {
            missing.push_back("n" + std::to_string(n) + "_seed" +
                              std::to_string(seed) + "_" + arm);
          }
        }
      }
    }
    if (!missing.empty()) {
      std::string listing;
      for (const auto& m : missing) listing += "\n  " + m;
      throw ConfigError("experiment is missing " +
                        std::to_string(missing.size()) + " cells:" + listing);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  try {
    const fs::path out_dir = out_dir_arg.empty() ? fs::path(report_dir)
                                                 : fs::path(out_dir_arg);
    fs::create_directories(out_dir);
    const auto aggregates = flowsense::transfer::aggregate_cells(cells);

    // Fig.-4-style curve: RMSE vs n for both arms (n = 0 row carries the
    // zero-shot numbers).
    flowsense::transfer::write_aggregate_csv(
        (out_dir / "fig4_curve.csv").string(), aggregates);

    // Fig.-5-style series: pass the experiment's prediction series through.
    {
      const fs::path src = fs::path(report_dir) / "series.csv";
      if (!fs::exists(src)) {
        throw flowsense::ValidationError("series.csv missing from " +
                                         report_dir);
      }
      std::ifstream in(src, std::ios::binary);
      std::ofstream out(out_dir / "fig5_series.csv",
                        std::ios::binary | std::ios::trunc);
      out << in.rdbuf();
    }

    // Table-1-style reductions: one column per nonzero n.
    {
      std::ofstream out(out_dir / "table1_reductions.csv",
                        std::ios::binary | std::ios::trunc);
      out << "aggregation";
      for (const auto& a : aggregates) {
        if (a.n_points > 0) out << "," << a.n_points;
      }
      out << "\n";
      char buf[32];
      out << "reduction_per_seed_avg_pct";
      for (const auto& a : aggregates) {
        if (a.n_points > 0) {
          std::snprintf(buf, sizeof(buf), ",%.4f", a.reduction_per_seed_avg);
          out << buf;
        }
      }
      out << "\nreduction_of_means_pct";
      for (const auto& a : aggregates) {
        if (a.n_points > 0) {
          std::snprintf(buf, sizeof(buf), ",%.4f", a.reduction_of_means);
          out << buf;
        }
      }
      out << "\n";
    }
    std::printf("report written to %s\n", out_dir.string().c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int run_export_csv(const std::string& dataset_path, const std::string& out) {
  try {
    require_input_file(dataset_path, "dataset");
    if (out.empty()) throw ConfigError("--out is required");
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  try {
    const auto ds = flowsense::flowgraph::load_dataset(dataset_path);
    flowsense::flowgraph::write_frames_csv(ds, out);
    std::printf("wrote %zu frames to %s\n", ds.frames.size(), out.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topology-aware soft-sensor toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a dynamic operating dataset");
  std::string sim_variant;
  CommonArgs sim_args;
  uint64_t sim_seed = 1;
  std::string sim_export_csv;
  bool sim_print_constants = false;
  sim->add_option("--variant", sim_variant, "process topology: A or B");
  sim->add_option("--config", sim_args.config_path, "key=value config file");
  sim->add_option("--out", sim_args.out, "dataset output path (JSON)");
  sim->add_option("--seed", sim_seed, "scenario seed");
  sim->add_option("--export-csv", sim_export_csv, "also write frames as CSV");
  sim->add_flag("--print-config", sim_args.print_config,
                "print config keys with defaults and exit");
  sim->add_flag("--print-constants", sim_print_constants,
                "print the simulator constants table and exit");

  // train
  auto* train = app.add_subcommand("train", "train the soft-sensor model on one dataset");
  std::string train_dataset;
  CommonArgs train_args;
  uint64_t train_seed = 1;
  train->add_option("--dataset", train_dataset, "dataset file");
  train->add_option("--config", train_args.config_path, "key=value config file");
  train->add_option("--out", train_args.out, "output directory");
  train->add_option("--seed", train_seed, "training seed");
  train->add_flag("--print-config", train_args.print_config,
                  "print config keys with defaults and exit");

  // experiment
  auto* exp = app.add_subcommand(
      "experiment", "pretrain on the source and run the transfer grid on the target");
  std::string exp_source, exp_target;
  CommonArgs exp_args;
  uint64_t exp_seed_base = 1;
  int exp_jobs = 1;
  exp->add_option("--source", exp_source, "source-domain dataset");
  exp->add_option("--target", exp_target, "target-domain dataset");
  exp->add_option("--config", exp_args.config_path, "key=value config file");
  exp->add_option("--out", exp_args.out, "output directory");
  exp->add_option("--seed-base", exp_seed_base, "first seed of the batch");
  exp->add_option("--jobs", exp_jobs, "parallel grid cells");
  exp->add_flag("--print-config", exp_args.print_config,
                "print config keys with defaults and exit");

  // report
  auto* rep = app.add_subcommand("report", "emit plot-ready CSVs from a finished experiment");
  std::string rep_dir, rep_out;
  rep->add_option("--dir", rep_dir, "experiment output directory");
  rep->add_option("--out", rep_out, "report output directory (default: --dir)");

  // export-csv
  auto* exp_csv = app.add_subcommand("export-csv", "dump dataset frames as CSV");
  std::string csv_dataset, csv_out;
  exp_csv->add_option("--dataset", csv_dataset, "dataset file");
  exp_csv->add_option("--out", csv_out, "CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (sim->parsed()) {
    if (!sim_args.print_config && !sim_print_constants && sim_variant.empty()) {
      std::fprintf(stderr, "config error: --variant is required\n");
      return 2;
    }
    return run_simulate(sim_variant, sim_args, sim_seed, sim_export_csv,
                        sim_print_constants);
  }
  if (train->parsed()) return run_train(train_dataset, train_args, train_seed);
  if (exp->parsed()) {
    return run_experiment_cmd(exp_source, exp_target, exp_args, exp_seed_base,
                              exp_jobs);
  }
  if (rep->parsed()) return run_report(rep_dir, rep_out);
  if (exp_csv->parsed()) return run_export_csv(csv_dataset, csv_out);
  return 2;
}
