#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "robust_te/agent.hpp"
#include "robust_te/config.hpp"
#include "robust_te/dataio.hpp"
#include "robust_te/netmodel.hpp"
#include "robust_te/policy.hpp"

namespace robust_te {

// Runs fn(0..n-1) on up to `threads` workers (0 = hardware concurrency).
// The exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

// Everything every scheme shares: one topology, one trace, one candidate set
// and one |R|.
struct Workload {
  Topology topo;
  TrafficTrace trace;
  CandidatePathSet cps;
  std::size_t r_size = 0;
};

Workload prepare_workload(const ExperimentConfig& config);
Workload make_workload(Topology topo, TrafficTrace trace, std::size_t k,
                       std::optional<std::size_t> r_size);

// Diamond-plus regime-switch benchmark: pairs (A,E) and (B,E) alternate
// between a heavy and a light share every `period` intervals.
struct Benchmark {
  Topology topo;
  TrafficTrace trace;
};
Benchmark diamond_plus_benchmark(std::size_t length = 120, std::size_t period = 12,
                                 std::uint64_t seed = 7);

// Output file names inside config.output_dir.
std::string run_tag(std::size_t c, std::size_t w);
std::string model_file(const ExperimentConfig& config, std::size_t c, std::size_t w);
std::string curve_file(const ExperimentConfig& config, std::size_t c, std::size_t w);

StateNormalizer make_normalizer(const ExperimentConfig& config, const Workload& workload,
                                const TraceSplit& split, std::size_t c, std::size_t w);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_reward = 0.0;
  double mean_mlu_ratio = 0.0;  // sampled action vs hindsight on the same windows
  double learning_rate = 0.0;
  std::size_t updates = 0;
};

struct TrainRun {
  PolicyModel model;
  std::vector<EpochStats> curve;
  TraceSplit split;
  StateNormalizer normalizer;
};

struct TrainHooks {
  std::function<void(const EpochStats&)> on_epoch;
  bool write_files = true;  // learning curve and checkpoints into output_dir
  bool resume = false;      // continue from an existing checkpoint and curve
};

TrainRun train_policy(const ExperimentConfig& config, const Workload& workload, std::size_t c,
                      std::size_t w, const TrainHooks& hooks = {});

// Columns: config_hash,c,w,epoch,mean_reward,mean_mlu_ratio,learning_rate
void write_learning_curve(const std::string& hash, std::size_t c, std::size_t w,
                          const std::vector<EpochStats>& curve, std::ostream& out);
std::vector<EpochStats> read_learning_curve(std::istream& in);

// First epoch whose trailing mean reward (over `smooth` epochs) reaches
// `fraction` of the mean reward of the last `tail` epochs.
std::size_t convergence_epoch(const std::vector<EpochStats>& curve, double fraction = 0.95,
                              std::size_t smooth = 20, std::size_t tail = 50);

struct WindowRecord {
  std::size_t t = 0;
  std::string scheme;
  double mean_mlu = 0.0;
  double ratio = 0.0;
  std::size_t churn = 0;    // path-set changes between intervals of the window
  std::size_t n_paths = 0;  // distinct paths installed over the window
};

struct SchemeSummary {
  std::string scheme;
  double mean_mlu_ratio = 0.0;
  double mean_mlu = 0.0;
  double mean_churn = 0.0;
  std::size_t windows = 0;
};

struct ComparisonReport {
  std::string config_hash;
  std::size_t c = 0;
  std::size_t w = 0;
  std::size_t r_size = 0;
  std::uint64_t split_seed = 0;
  std::uint64_t init_seed = 0;
  std::uint64_t sample_seed = 0;
  std::vector<WindowRecord> windows;  // by t, then configured scheme order
  std::vector<SchemeSummary> summary;  // configured scheme order
  double wall_seconds = 0.0;           // metadata only; never written to CSV

  const SchemeSummary& scheme(const std::string& name) const;
};

// Ratios use the hindsight scheme as denominator; a window whose hindsight
// MLU is zero counts as ratio one. `model` is required when "drl" is listed.
ComparisonReport evaluate_schemes(const ExperimentConfig& config, const Workload& workload,
                                  const PolicyModel* model, std::size_t c, std::size_t w);

// Columns: config_hash,c,w,t,scheme,mean_mlu,ratio,churn,n_paths
void write_report_csv(const ComparisonReport& report, std::ostream& out);
// Columns: config_hash,c,w,scheme,mean_mlu_ratio,mean_mlu,mean_churn,windows
void write_summary_csv(const ComparisonReport& report, std::ostream& out);
// Seeds, |R| and wall-clock as JSON.
void write_report_meta(const ComparisonReport& report, std::ostream& out);

struct ChurnRow {
  std::string scheme;
  std::size_t t = 0;
  std::size_t churn = 0;
};

// Installed-path churn at every interval boundary from the first DRL window
// on. MLU-optimal installs its used paths each interval; DRL installs the
// guarded greedy set at starts t = multiples of w (from the first multiple
// >= c) and keeps it for the window.
std::vector<ChurnRow> churn_report(const ExperimentConfig& config, const Workload& workload,
                                   const PolicyModel* model, std::size_t c, std::size_t w);
// Columns: config_hash,c,w,scheme,t,churn
void write_churn_csv(const std::string& hash, std::size_t c, std::size_t w,
                     const std::vector<ChurnRow>& rows, std::ostream& out);

struct OverutilRow {
  std::size_t t = 0;
  std::string link;
  double overutil = 0.0;
};

// stale_path_overutilization between MLU-optimal routings of t-1 and t.
std::vector<OverutilRow> overutil_report(const ExperimentConfig& config,
                                         const Workload& workload);
// Columns: config_hash,t,link,overutil
void write_overutil_csv(const std::string& hash, const std::vector<OverutilRow>& rows,
                        std::ostream& out);

// Collects the CSVs in `dir` into dir/figs/{fig2a,fig2b,fig3,fig4,fig5a,fig5b}.csv.
// Returns the files written.
std::vector<std::string> export_plot_data(const std::string& dir, bool plot_script = false);

// Shared CSV number formatting (round-trip precision, locale free).
std::string format_number(double value);

}  // namespace robust_te
