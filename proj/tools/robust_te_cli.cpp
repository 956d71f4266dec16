#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "robust_te/baselines.hpp"
#include "robust_te/config.hpp"
#include "robust_te/errors.hpp"
#include "robust_te/harness.hpp"

namespace fs = std::filesystem;
using namespace robust_te;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitSolver = 4;

struct Overrides {
  std::string config_path;
  std::optional<std::size_t> epochs;
  std::vector<std::size_t> c_values;
  std::vector<std::size_t> w_values;
  std::optional<std::size_t> r_size;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> threads;
  std::optional<double> scale;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    cmd->add_option("--epochs", epochs, "override epochs");
    cmd->add_option("--c", c_values, "override commitment window(s)");
    cmd->add_option("--w", w_values, "override look-ahead window(s)");
    cmd->add_option("--R", r_size, "override |R|");
    cmd->add_option("--output-dir", output_dir, "override output directory");
    cmd->add_option("--threads", threads, "worker threads (0 = all cores)");
    cmd->add_option("--scale", scale, "override demand scale factor");
    cmd->add_option("--seed", seed, "set split, init and sample seeds to this value");
  }

  ExperimentConfig load() const {
    ExperimentConfig cfg = load_config(config_path);
    if (epochs) cfg.epochs = *epochs;
    if (!c_values.empty()) cfg.c_values = c_values;
    if (!w_values.empty()) cfg.w_values = w_values;
    if (r_size) cfg.r_size = *r_size;
    if (output_dir) cfg.output_dir = *output_dir;
    if (threads) cfg.threads = *threads;
    if (scale) cfg.scale = *scale;
    if (seed) cfg.split_seed = cfg.init_seed = cfg.sample_seed = *seed;
    validate_config(cfg);
    return cfg;
  }
};

void write_to(const std::string& path, const std::function<void(std::ostream&)>& body) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  body(out);
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  return (fs::path(cfg.output_dir) / name).string();
}

bool wants_drl(const ExperimentConfig& cfg) {
  return std::find(cfg.schemes.begin(), cfg.schemes.end(), "drl") != cfg.schemes.end();
}

int cmd_train(const Overrides& ov, bool resume, bool quiet) {
  const ExperimentConfig cfg = ov.load();
  const Workload wl = prepare_workload(cfg);
  std::cerr << "R=" << wl.r_size << " paths=" << wl.cps.num_paths()
            << " intervals=" << wl.trace.size() << '\n';
  for (auto c : cfg.c_values) {
    for (auto w : cfg.w_values) {
      TrainHooks hooks;
      hooks.resume = resume;
      if (!quiet) {
        hooks.on_epoch = [&](const EpochStats& e) {
          if (e.epoch % 10 == 0 || e.epoch + 1 == cfg.epochs) {
            std::cerr << run_tag(c, w) << " epoch " << e.epoch << " reward "
                      << format_number(e.mean_reward) << " ratio "
                      << format_number(e.mean_mlu_ratio) << '\n';
          }
        };
      }
      train_policy(cfg, wl, c, w, hooks);
      std::cout << model_file(cfg, c, w) << '\n' << curve_file(cfg, c, w) << '\n';
    }
  }
  return 0;
}

int cmd_evaluate(const Overrides& ov, const std::string& model_override) {
  const ExperimentConfig cfg = ov.load();
  const Workload wl = prepare_workload(cfg);
  if (!model_override.empty() && cfg.c_values.size() * cfg.w_values.size() != 1) {
    throw ConfigError("--model needs a single (c, w) combination");
  }
  for (auto c : cfg.c_values) {
    for (auto w : cfg.w_values) {
      std::optional<PolicyModel> model;
      if (wants_drl(cfg)) {
        model = load_model_file(model_override.empty() ? model_file(cfg, c, w) : model_override);
      }
      const ComparisonReport report =
          evaluate_schemes(cfg, wl, model ? &*model : nullptr, c, w);
      const std::string tag = run_tag(c, w);
      write_to(out_path(cfg, "report_" + tag + ".csv"),
               [&](std::ostream& o) { write_report_csv(report, o); });
      write_to(out_path(cfg, "summary_" + tag + ".csv"),
               [&](std::ostream& o) { write_summary_csv(report, o); });
      write_to(out_path(cfg, "meta_" + tag + ".json"),
               [&](std::ostream& o) { write_report_meta(report, o); });
      write_summary_csv(report, std::cout);
    }
  }
  return 0;
}

int cmd_churn(const Overrides& ov) {
  const ExperimentConfig cfg = ov.load();
  const Workload wl = prepare_workload(cfg);
  const std::string hash = config_hash(cfg);
  for (auto c : cfg.c_values) {
    for (auto w : cfg.w_values) {
      std::optional<PolicyModel> model;
      if (wants_drl(cfg)) model = load_model_file(model_file(cfg, c, w));
      const auto rows = churn_report(cfg, wl, model ? &*model : nullptr, c, w);
      const std::string path = out_path(cfg, "churn_" + run_tag(c, w) + ".csv");
      write_to(path, [&](std::ostream& o) { write_churn_csv(hash, c, w, rows, o); });
      std::cout << path << '\n';
    }
  }
  return 0;
}

int cmd_overutil(const Overrides& ov) {
  const ExperimentConfig cfg = ov.load();
  const Workload wl = prepare_workload(cfg);
  const auto rows = overutil_report(cfg, wl);
  const std::string path = out_path(cfg, "overutil.csv");
  write_to(path, [&](std::ostream& o) { write_overutil_csv(config_hash(cfg), rows, o); });
  std::cout << path << '\n';
  return 0;
}

int cmd_calibrate(const Overrides& ov) {
  ExperimentConfig cfg = ov.load();
  cfg.r_size.reset();
  const Workload wl = prepare_workload(cfg);
  std::cout << wl.r_size << '\n';
  return 0;
}

struct SynthArgs {
  std::string topology;
  std::string pattern = "gravity";
  std::string benchmark;
  std::string out;
  SynthOptions options;
};

int cmd_synth(const SynthArgs& a) {
  if (a.out.empty()) throw ConfigError("synth needs --out");
  if (!a.benchmark.empty()) {
    if (a.benchmark != "diamond-plus") throw ConfigError("unknown benchmark " + a.benchmark);
    const Benchmark b =
        diamond_plus_benchmark(a.options.length, a.options.period, a.options.seed);
    write_to(a.out + ".topo", [&](std::ostream& o) { write_topology(b.topo, o); });
    write_to(a.out + ".csv", [&](std::ostream& o) { write_trace_csv(b.trace, b.topo, o); });
    std::cout << a.out << ".topo\n" << a.out << ".csv\n";
    return 0;
  }
  if (a.topology.empty()) throw ConfigError("synth needs --topology or --benchmark");
  const Topology topo = read_topology_file(a.topology);
  SynthOptions opts = a.options;
  opts.pattern = parse_synth_pattern(a.pattern);
  const TrafficTrace trace = synth_trace(topo, opts);
  write_to(a.out, [&](std::ostream& o) { write_trace_csv(trace, topo, o); });
  std::cout << a.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust path selection for traffic engineering"};
  app.require_subcommand(1);

  Overrides train_ov, eval_ov, churn_ov, overutil_ov, calib_ov;
  bool resume = false, quiet = false;
  auto* train = app.add_subcommand("train", "train the path-selection policy");
  train_ov.attach(train);
  train->add_flag("--resume", resume, "continue from existing checkpoints");
  train->add_flag("--quiet", quiet, "no progress output");

  std::string model_override;
  auto* evaluate = app.add_subcommand("evaluate", "compare schemes on the test split");
  eval_ov.attach(evaluate);
  evaluate->add_option("--model", model_override, "checkpoint to evaluate");

  auto* churn = app.add_subcommand("churn", "per-interval path churn CSV");
  churn_ov.attach(churn);
  auto* overutil = app.add_subcommand("overutil", "stale-path over-utilization CSV");
  overutil_ov.attach(overutil);

  std::string export_dir, export_config;
  bool plot_script = false;
  auto* exp = app.add_subcommand("export", "collect figure CSVs");
  exp->add_option("--dir", export_dir, "output directory holding run CSVs");
  exp->add_option("--config", export_config, "take the directory from this config");
  exp->add_flag("--plot-script", plot_script, "also write a matplotlib script");

  auto* calib = app.add_subcommand("calibrate-r", "print the calibrated |R|");
  calib_ov.attach(calib);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "write a synthetic trace");
  synth->add_option("--topology", synth_args.topology, "topology file");
  synth->add_option("--pattern", synth_args.pattern, "periodic | gravity | regime-switch");
  synth->add_option("--benchmark", synth_args.benchmark, "diamond-plus: write topology and trace");
  synth->add_option("--length", synth_args.options.length, "intervals");
  synth->add_option("--seed", synth_args.options.seed, "seed");
  synth->add_option("--period", synth_args.options.period, "regime or cycle length");
  synth->add_option("--load", synth_args.options.load, "target mean link load");
  synth->add_option("--noise", synth_args.options.noise, "multiplicative noise amplitude");
  synth->add_option("--interval-seconds", synth_args.options.interval_seconds, "interval length");
  synth->add_option("--out", synth_args.out, "output path (prefix for --benchmark)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(train_ov, resume, quiet);
    if (*evaluate) return cmd_evaluate(eval_ov, model_override);
    if (*churn) return cmd_churn(churn_ov);
    if (*overutil) return cmd_overutil(overutil_ov);
    if (*calib) return cmd_calibrate(calib_ov);
    if (*synth) return cmd_synth(synth_args);
    if (*exp) {
      std::string dir = export_dir;
      if (dir.empty() && !export_config.empty()) dir = load_config(export_config).output_dir;
      if (dir.empty()) throw ConfigError("export needs --dir or --config");
      for (const auto& f : export_plot_data(dir, plot_script)) std::cout << f << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const PreconditionError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
