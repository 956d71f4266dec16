#include "robust_te/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "robust_te/baselines.hpp"
#include "robust_te/errors.hpp"
#include "robust_te/routing.hpp"

namespace robust_te {

namespace fs = std::filesystem;

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= n) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string format_number(double value) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(12) << value;
  return os.str();
}

Workload make_workload(Topology topo, TrafficTrace trace, std::size_t k,
                       std::optional<std::size_t> r_size) {
  Workload wl;
  wl.topo = std::move(topo);
  wl.trace = std::move(trace);
  validate_trace(wl.trace);
  wl.cps = build_candidate_paths(wl.topo, wl.trace.pairs, k);
  wl.r_size = r_size ? *r_size : calibrate_R(wl.topo, wl.trace, wl.cps);
  return wl;
}

Workload prepare_workload(const ExperimentConfig& cfg) {
  Topology topo = read_topology_file(cfg.topology_path);
  if (cfg.random_capacities) {
    topo = random_capacities(topo, cfg.random_capacities->lo, cfg.random_capacities->hi,
                             cfg.random_capacities->seed);
  }
  TrafficTrace trace;
  if (cfg.synth) {
    trace = synth_trace(topo, *cfg.synth);
  } else {
    TraceLoadOptions opts;
    opts.interval_seconds = cfg.interval_seconds;
    opts.unit_scale = cfg.unit_scale;
    trace = load_trace(cfg.trace_path, parse_trace_format(cfg.trace_format), topo, opts);
  }
  if (cfg.scale != 1.0) trace = scale_trace(trace, cfg.scale);
  return make_workload(std::move(topo), std::move(trace), cfg.k, cfg.r_size);
}

Benchmark diamond_plus_benchmark(std::size_t length, std::size_t period, std::uint64_t seed) {
  TopologySpec spec;
  spec.nodes = {"A", "B", "C", "D", "E"};
  spec.links = {{"A", "B", 10.0, 1.0}, {"A", "C", 10.0, 1.0}, {"A", "D", 10.0, 1.0},
                {"B", "A", 10.0, 1.0},
                {"B", "C", 10.0, 1.0}, {"B", "D", 10.0, 1.0}, {"C", "E", 10.0, 1.0},
                {"D", "E", 30.0, 1.0}};
  Benchmark b;
  b.topo = build_topology(spec);
  const FlowPair ae{*b.topo.find_node("A"), *b.topo.find_node("E")};
  const FlowPair be{*b.topo.find_node("B"), *b.topo.find_node("E")};
  Eigen::VectorXd heavy_a(2), heavy_b(2);
  heavy_a << 16.0, 2.0;
  heavy_b << 2.0, 16.0;
  b.trace = regime_switch_trace({ae, be}, {heavy_a, heavy_b}, length, period, 0.1, seed);
  return b;
}

std::string run_tag(std::size_t c, std::size_t w) {
  return "c" + std::to_string(c) + "_w" + std::to_string(w);
}

std::string model_file(const ExperimentConfig& cfg, std::size_t c, std::size_t w) {
  return (fs::path(cfg.output_dir) / ("model_" + run_tag(c, w) + ".ckpt")).string();
}

std::string curve_file(const ExperimentConfig& cfg, std::size_t c, std::size_t w) {
  return (fs::path(cfg.output_dir) / ("learning_curve_" + run_tag(c, w) + ".csv")).string();
}

namespace {

std::span<const TrafficMatrix> window_of(const TrafficTrace& trace, std::size_t t,
                                         std::size_t w) {
  return std::span<const TrafficMatrix>(trace.matrices).subspan(t, w);
}

double window_total(std::span<const TrafficMatrix> dms) {
  double s = 0.0;
  for (const auto& dm : dms) s += dm.demand.sum();
  return s;
}

AgentState state_at(const Workload& wl, std::size_t t, std::size_t c,
                    const StateNormalizer& normalizer) {
  return encode_state(window_of(wl.trace, t - c, c), wl.cps.pairs(), wl.topo.num_nodes(), c,
                      normalizer);
}

double ratio_of(double value, double hindsight) {
  if (hindsight <= 1e-12) return 1.0;
  return value / hindsight;
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    body(out);
    if (!out) throw DataError("write failed for " + path);
  }
  fs::rename(tmp, path);
}

void check_split(const TraceSplit& split, std::size_t c, std::size_t w) {
  if (split.train.empty() || split.test.empty()) {
    throw PreconditionError("trace too short for c=" + std::to_string(c) +
                            " w=" + std::to_string(w) + ": need train and test windows");
  }
}

}  // namespace

StateNormalizer make_normalizer(const ExperimentConfig& cfg, const Workload& wl,
                                const TraceSplit& split, std::size_t c, std::size_t w) {
  StateNormalizer n;
  if (cfg.normalization == "window-max") {
    n.mode = StateNormalizer::Mode::kWindowMax;
    return n;
  }
  double peak = 0.0;
  for (auto t : split.train) {
    for (std::size_t i = t - c; i < t + w; ++i) {
      if (wl.trace.matrices[i].demand.size() > 0) {
        peak = std::max(peak, wl.trace.matrices[i].demand.maxCoeff());
      }
    }
  }
  n.scale = peak > 0.0 ? peak : 1.0;
  return n;
}

void write_learning_curve(const std::string& hash, std::size_t c, std::size_t w,
                          const std::vector<EpochStats>& curve, std::ostream& out) {
  out << "config_hash,c,w,epoch,mean_reward,mean_mlu_ratio,learning_rate\n";
  for (const auto& e : curve) {
    out << hash << ',' << c << ',' << w << ',' << e.epoch << ',' << format_number(e.mean_reward)
        << ',' << format_number(e.mean_mlu_ratio) << ',' << format_number(e.learning_rate)
        << '\n';
  }
}

std::vector<EpochStats> read_learning_curve(std::istream& in) {
  std::vector<EpochStats> curve;
  std::string line;
  if (!std::getline(in, line)) return curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw DataError("malformed learning-curve row: " + line);
    EpochStats e;
    e.epoch = std::stoul(f[3]);
    e.mean_reward = std::stod(f[4]);
    e.mean_mlu_ratio = std::stod(f[5]);
    e.learning_rate = std::stod(f[6]);
    curve.push_back(e);
  }
  return curve;
}

std::size_t convergence_epoch(const std::vector<EpochStats>& curve, double fraction,
                              std::size_t smooth, std::size_t tail) {
  if (curve.empty()) return 0;
  tail = std::clamp<std::size_t>(tail, 1, curve.size());
  smooth = std::clamp<std::size_t>(smooth, 1, curve.size());
  double final_reward = 0.0;
  for (std::size_t i = curve.size() - tail; i < curve.size(); ++i) {
    final_reward += curve[i].mean_reward;
  }
  final_reward /= static_cast<double>(tail);
  const double target = fraction * final_reward;
  double run = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    run += curve[i].mean_reward;
    if (i >= smooth) run -= curve[i - smooth].mean_reward;
    const double avg = run / static_cast<double>(std::min(i + 1, smooth));
    if (avg >= target) return curve[i].epoch;
  }
  return curve.back().epoch;
}

TrainRun train_policy(const ExperimentConfig& cfg, const Workload& wl, std::size_t c,
                      std::size_t w, const TrainHooks& hooks) {
  TrainRun run;
  run.split = split_trace(wl.trace, cfg.train_frac, w, c, cfg.split_seed);
  check_split(run.split, c, w);
  run.normalizer = make_normalizer(cfg, wl, run.split, c, w);
  const std::string hash = config_hash(cfg);

  PolicyShape shape;
  shape.channels = c;
  shape.grid = wl.topo.num_nodes();
  shape.filters = cfg.filters;
  shape.hidden = cfg.hidden;
  shape.outputs = wl.cps.num_paths();
  run.model = PolicyModel(shape, cfg.init_seed, cfg.optimizer);

  const std::string ckpt = model_file(cfg, c, w);
  const std::string curve_path = curve_file(cfg, c, w);
  if (hooks.resume && fs::exists(ckpt) && fs::exists(curve_path)) {
    PolicyModel loaded = load_model_file(ckpt);
    if (!(loaded.shape() == shape)) {
      throw ConfigError("checkpoint " + ckpt + " does not match the configured model");
    }
    run.model = std::move(loaded);
    std::ifstream in(curve_path);
    run.curve = read_learning_curve(in);
  }

  // All-zero windows give the capped reward to every action and carry no signal.
  std::vector<std::size_t> starts;
  for (auto t : run.split.train) {
    if (window_total(window_of(wl.trace, t, w)) > 0.0) starts.push_back(t);
  }
  if (starts.empty()) throw PreconditionError("every training window has zero demand");

  std::vector<AgentState> states(starts.size());
  std::vector<std::vector<bool>> demanded(starts.size());
  std::vector<double> hindsight(starts.size());
  parallel_for(starts.size(), cfg.threads, [&](std::size_t i) {
    const auto dms = window_of(wl.trace, starts[i], w);
    states[i] = state_at(wl, starts[i], c, run.normalizer);
    demanded[i] = demanded_pairs(dms, wl.cps.num_pairs());
    hindsight[i] = hindsight_robust_paths(wl.topo, dms, wl.cps, wl.r_size).allocation.objective;
  });

  std::size_t epoch_len = cfg.epoch_length;
  if (epoch_len == 0) {
    epoch_len = static_cast<std::size_t>(std::floor(86400.0 / wl.trace.interval_seconds));
  }
  epoch_len = std::clamp<std::size_t>(epoch_len, 1, starts.size());
  const std::size_t per_state = cfg.samples_per_state;
  const std::size_t states_per_batch =
      cfg.batch_size == 0 ? epoch_len : std::max<std::size_t>(1, cfg.batch_size / per_state);

  for (std::size_t epoch = run.curve.size(); epoch < cfg.epochs; ++epoch) {
    std::seed_seq seq{cfg.sample_seed, static_cast<std::uint64_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> order(starts.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(epoch_len);

    EpochStats stats;
    stats.epoch = epoch;
    stats.learning_rate = lr_schedule(run.model.step(), run.model.settings());
    double reward_sum = 0.0, ratio_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += states_per_batch) {
      const std::size_t b1 = std::min(order.size(), b0 + states_per_batch);
      std::vector<Experience> batch;
      std::vector<std::size_t> owner;
      for (std::size_t j = b0; j < b1; ++j) {
        const std::size_t i = order[j];
        const Eigen::VectorXd probs = run.model.probabilities(states[i]);
        for (std::size_t s = 0; s < per_state; ++s) {
          Experience e;
          e.state = states[i];
          e.state_key = starts[i];
          e.action = safe_guard(sample_action(probs, wl.r_size, rng), demanded[i], wl.cps);
          batch.push_back(std::move(e));
          owner.push_back(i);
        }
      }
      std::vector<double> mlu(batch.size());
      parallel_for(batch.size(), cfg.threads, [&](std::size_t k) {
        const auto dms = window_of(wl.trace, starts[owner[k]], w);
        RewardResult r = compute_reward(wl.topo, dms, wl.cps, batch[k].action);
        batch[k].reward = r.reward;
        mlu[k] = r.allocation.objective;
      });
      for (std::size_t k = 0; k < batch.size(); ++k) {
        reward_sum += batch[k].reward;
        ratio_sum += ratio_of(mlu[k], hindsight[owner[k]]);
        ++count;
      }
      if (reinforce_update(run.model, batch).applied) ++stats.updates;
    }
    stats.mean_reward = reward_sum / static_cast<double>(count);
    stats.mean_mlu_ratio = ratio_sum / static_cast<double>(count);
    run.curve.push_back(stats);
    if (hooks.on_epoch) hooks.on_epoch(stats);

    const bool last = epoch + 1 == cfg.epochs;
    if (hooks.write_files &&
        (last || (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0))) {
      write_file(ckpt, [&](std::ostream& out) { save_model(run.model, out); });
      write_file(curve_path,
                 [&](std::ostream& out) { write_learning_curve(hash, c, w, run.curve, out); });
    }
  }
  return run;
}

const SchemeSummary& ComparisonReport::scheme(const std::string& name) const {
  for (const auto& s : summary) {
    if (s.scheme == name) return s;
  }
  throw PreconditionError("scheme " + name + " not in report");
}

ComparisonReport evaluate_schemes(const ExperimentConfig& cfg, const Workload& wl,
                                  const PolicyModel* model, std::size_t c, std::size_t w) {
  const auto clock_start = std::chrono::steady_clock::now();
  const auto has = [&](const std::string& s) {
    return std::find(cfg.schemes.begin(), cfg.schemes.end(), s) != cfg.schemes.end();
  };
  const TraceSplit split = split_trace(wl.trace, cfg.train_frac, w, c, cfg.split_seed);
  check_split(split, c, w);
  if (has("drl")) {
    if (model == nullptr) throw PreconditionError("scheme drl needs a trained model");
    const PolicyShape& s = model->shape();
    if (s.channels != c || s.grid != wl.topo.num_nodes() || s.outputs != wl.cps.num_paths()) {
      throw ConfigError("model checkpoint does not match the workload (c, nodes or paths)");
    }
  }
  const StateNormalizer normalizer = make_normalizer(cfg, wl, split, c, w);

  ObliviousRouting oblivious;
  if (has("oblivious")) {
    std::set<std::size_t> intervals;
    for (auto t : split.train) {
      for (std::size_t i = t; i < t + w; ++i) intervals.insert(i);
    }
    std::vector<TrafficMatrix> training;
    for (auto i : intervals) training.push_back(wl.trace.matrices[i]);
    oblivious = oblivious_rates(wl.topo, training, wl.cps);
  }
  const Eigen::VectorXd ecmp = ecmp_rates(wl.cps);
  const std::size_t ecmp_paths = used_paths(wl.cps, ecmp).size();

  ComparisonReport report;
  report.config_hash = config_hash(cfg);
  report.c = c;
  report.w = w;
  report.r_size = wl.r_size;
  report.split_seed = cfg.split_seed;
  report.init_seed = cfg.init_seed;
  report.sample_seed = cfg.sample_seed;

  const std::size_t n = split.test.size();
  std::vector<std::vector<WindowRecord>> per_window(n);
  parallel_for(n, cfg.threads, [&](std::size_t idx) {
    const std::size_t t = split.test[idx];
    const auto dms = window_of(wl.trace, t, w);
    const double hind = hindsight_robust_paths(wl.topo, dms, wl.cps, wl.r_size).allocation.objective;
    std::map<std::string, WindowRecord> rec;
    auto put = [&](const std::string& name, double mlu, std::size_t churn, std::size_t n_paths) {
      WindowRecord r;
      r.t = t;
      r.scheme = name;
      r.mean_mlu = mlu;
      r.ratio = ratio_of(mlu, hind);
      r.churn = churn;
      r.n_paths = n_paths;
      rec[name] = r;
    };
    for (const auto& name : cfg.schemes) {
      if (name == "hindsight") {
        const auto h = hindsight_robust_paths(wl.topo, dms, wl.cps, wl.r_size);
        put(name, h.allocation.objective, 0, h.subset.size());
      } else if (name == "mlu-optimal") {
        double sum = 0.0;
        std::size_t churn = 0;
        std::set<PathId> all;
        std::vector<PathId> prev;
        for (std::size_t i = 0; i < dms.size(); ++i) {
          const RateAllocation a = solve_mcf(wl.topo, dms[i], wl.cps);
          sum += a.objective;
          auto used = used_paths(wl.cps, a.rates[0]);
          if (i > 0) churn += measure_churn(prev, used);
          all.insert(used.begin(), used.end());
          prev = std::move(used);
        }
        put(name, sum / static_cast<double>(dms.size()), churn, all.size());
      } else if (name == "ecmp") {
        double sum = 0.0;
        for (const auto& dm : dms) sum += max_link_utilization(wl.topo, wl.cps, dm.demand, ecmp);
        put(name, sum / static_cast<double>(dms.size()), 0, ecmp_paths);
      } else if (name == "oblivious") {
        double sum = 0.0;
        for (const auto& dm : dms) {
          sum += max_link_utilization(wl.topo, wl.cps, dm.demand, oblivious.rates);
        }
        put(name, sum / static_cast<double>(dms.size()), 0,
            used_paths(wl.cps, oblivious.rates).size());
      } else if (name == "drl") {
        const AgentState state = state_at(wl, t, c, normalizer);
        const Action a = safe_guard(greedy_action(*model, state, wl.r_size, wl.cps),
                                    demanded_pairs(dms, wl.cps.num_pairs()), wl.cps);
        const RateAllocation alloc = solve_robust_rates(wl.topo, dms, wl.cps, a.subset());
        put(name, alloc.objective, 0, a.paths.size());
      }
    }
    for (const auto& name : cfg.schemes) per_window[idx].push_back(rec.at(name));
  });

  for (auto& rows : per_window) {
    for (auto& r : rows) report.windows.push_back(std::move(r));
  }
  for (const auto& name : cfg.schemes) {
    SchemeSummary s;
    s.scheme = name;
    for (const auto& r : report.windows) {
      if (r.scheme != name) continue;
      s.mean_mlu_ratio += r.ratio;
      s.mean_mlu += r.mean_mlu;
      s.mean_churn += static_cast<double>(r.churn);
      ++s.windows;
    }
    if (s.windows > 0) {
      const double k = static_cast<double>(s.windows);
      s.mean_mlu_ratio /= k;
      s.mean_mlu /= k;
      s.mean_churn /= k;
    }
    report.summary.push_back(s);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return report;
}

void write_report_csv(const ComparisonReport& report, std::ostream& out) {
  out << "config_hash,c,w,t,scheme,mean_mlu,ratio,churn,n_paths\n";
  for (const auto& r : report.windows) {
    out << report.config_hash << ',' << report.c << ',' << report.w << ',' << r.t << ','
        << r.scheme << ',' << format_number(r.mean_mlu) << ',' << format_number(r.ratio) << ','
        << r.churn << ',' << r.n_paths << '\n';
  }
}

void write_summary_csv(const ComparisonReport& report, std::ostream& out) {
  out << "config_hash,c,w,scheme,mean_mlu_ratio,mean_mlu,mean_churn,windows\n";
  for (const auto& s : report.summary) {
    out << report.config_hash << ',' << report.c << ',' << report.w << ',' << s.scheme << ','
        << format_number(s.mean_mlu_ratio) << ',' << format_number(s.mean_mlu) << ','
        << format_number(s.mean_churn) << ',' << s.windows << '\n';
  }
}

void write_report_meta(const ComparisonReport& report, std::ostream& out) {
  nlohmann::json j;
  j["config_hash"] = report.config_hash;
  j["c"] = report.c;
  j["w"] = report.w;
  j["R"] = report.r_size;
  j["seeds"] = {{"split", report.split_seed},
                {"init", report.init_seed},
                {"sample", report.sample_seed}};
  j["wall_seconds"] = report.wall_seconds;
  out << j.dump(2) << '\n';
}

std::vector<ChurnRow> churn_report(const ExperimentConfig& cfg, const Workload& wl,
                                   const PolicyModel* model, std::size_t c, std::size_t w) {
  const std::size_t len = wl.trace.size();
  const std::size_t first = (c + w - 1) / w * w;
  std::vector<ChurnRow> rows;
  if (first >= len) return rows;

  std::vector<std::vector<PathId>> optimal(len - first);
  parallel_for(len - first, cfg.threads, [&](std::size_t i) {
    const RateAllocation a = solve_mcf(wl.topo, wl.trace.matrices[first + i], wl.cps);
    optimal[i] = used_paths(wl.cps, a.rates[0]);
  });
  for (std::size_t i = 1; i < optimal.size(); ++i) {
    rows.push_back({"mlu-optimal", first + i, measure_churn(optimal[i - 1], optimal[i])});
  }

  const bool with_drl =
      model != nullptr && std::find(cfg.schemes.begin(), cfg.schemes.end(), "drl") != cfg.schemes.end();
  if (with_drl) {
    const TraceSplit split = split_trace(wl.trace, cfg.train_frac, w, c, cfg.split_seed);
    const StateNormalizer normalizer = make_normalizer(cfg, wl, split, c, w);
    std::vector<std::size_t> starts;
    for (std::size_t t = first; t + w <= len; t += w) starts.push_back(t);
    std::vector<std::vector<PathId>> installed(starts.size());
    parallel_for(starts.size(), cfg.threads, [&](std::size_t i) {
      const auto dms = window_of(wl.trace, starts[i], w);
      const Action a = safe_guard(
          greedy_action(*model, state_at(wl, starts[i], c, normalizer), wl.r_size, wl.cps),
          demanded_pairs(dms, wl.cps.num_pairs()), wl.cps);
      installed[i] = a.subset().ids(wl.cps);
    });
    for (std::size_t i = 0; i < starts.size(); ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t t = starts[i] + j;
        if (t == first) continue;
        const std::size_t churn = j == 0 ? measure_churn(installed[i - 1], installed[i]) : 0;
        rows.push_back({"drl", t, churn});
      }
    }
  }
  return rows;
}

void write_churn_csv(const std::string& hash, std::size_t c, std::size_t w,
                     const std::vector<ChurnRow>& rows, std::ostream& out) {
  out << "config_hash,c,w,scheme,t,churn\n";
  for (const auto& r : rows) {
    out << hash << ',' << c << ',' << w << ',' << r.scheme << ',' << r.t << ',' << r.churn
        << '\n';
  }
}

std::vector<OverutilRow> overutil_report(const ExperimentConfig& cfg, const Workload& wl) {
  const std::size_t len = wl.trace.size();
  std::vector<Eigen::VectorXd> rates(len);
  parallel_for(len, cfg.threads, [&](std::size_t t) {
    rates[t] = solve_mcf(wl.topo, wl.trace.matrices[t], wl.cps).rates[0];
  });
  std::vector<OverutilRow> rows;
  for (std::size_t t = 1; t < len; ++t) {
    const Eigen::VectorXd diff = stale_path_overutilization(
        wl.topo, wl.cps, wl.trace.matrices[t], rates[t - 1], rates[t]);
    for (Eigen::Index l = 0; l < diff.size(); ++l) {
      rows.push_back({t, wl.topo.link_label(static_cast<LinkIndex>(l)), diff[l]});
    }
  }
  return rows;
}

void write_overutil_csv(const std::string& hash, const std::vector<OverutilRow>& rows,
                        std::ostream& out) {
  out << "config_hash,t,link,overutil\n";
  for (const auto& r : rows) {
    out << hash << ',' << r.t << ',' << r.link << ',' << format_number(r.overutil) << '\n';
  }
}

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("CSV lacks column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  Table t;
  std::string line;
  if (std::getline(in, line)) t.header = split_csv(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split_csv(line));
    if (t.rows.back().size() != t.header.size()) {
      throw DataError("ragged row in " + path.string());
    }
  }
  return t;
}

std::vector<fs::path> matching(const fs::path& dir, const std::string& prefix) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind(prefix, 0) == 0 && entry.path().extension() == ".csv") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Rows sorted numerically on the given integer columns, then by the rest.
void sort_rows(std::vector<std::vector<std::string>>& rows, std::vector<std::size_t> numeric) {
  std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
    for (auto k : numeric) {
      const long long x = std::stoll(a[k]), y = std::stoll(b[k]);
      if (x != y) return x < y;
    }
    return a < b;
  });
}

constexpr const char* kPlotScript = R"(import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt


def rows(name):
    with open(name) as f:
        return list(csv.DictReader(f))


def cdf(ax, values, label):
    values = sorted(values)
    n = len(values)
    ax.step(values, [(i + 1) / n for i in range(n)], where="post", label=label)


fig, ax = plt.subplots()
by_scheme = defaultdict(list)
for r in rows("fig2a.csv"):
    by_scheme[r["scheme"]].append(int(r["churn"]))
for scheme, vals in sorted(by_scheme.items()):
    cdf(ax, vals, scheme)
ax.set_xlabel("path churn")
ax.legend()
fig.savefig("fig2a.png")

fig, ax = plt.subplots()
cdf(ax, [float(r["overutil"]) for r in rows("fig2b.csv")], "stale paths")
ax.set_xlabel("utilization difference")
fig.savefig("fig2b.png")

fig, ax = plt.subplots()
series = defaultdict(list)
for r in rows("fig3.csv"):
    series[r["scheme"]].append((int(r["w"]), float(r["mean_mlu_ratio"])))
for scheme, pts in sorted(series.items()):
    pts.sort()
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=scheme)
ax.set_xlabel("w")
ax.set_ylabel("MLU ratio")
ax.legend()
fig.savefig("fig3.png")

for name, key in (("fig5a", "w"), ("fig5b", "c")):
    fig, ax = plt.subplots()
    curves = defaultdict(list)
    for r in rows(name + ".csv"):
        curves[r[key]].append((int(r["epoch"]), float(r["mean_reward"])))
    for label, pts in sorted(curves.items()):
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label=key + "=" + label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean reward")
    ax.legend()
    fig.savefig(name + ".png")

if len(sys.argv) > 1 and sys.argv[1] == "--show":
    plt.show()
)";

}  // namespace

std::vector<std::string> export_plot_data(const std::string& dir, bool plot_script) {
  const fs::path root(dir);
  const fs::path figs = root / "figs";
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
    const std::string path = (figs / name).string();
    write_file(path, [&](std::ostream& out) {
      for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
      out << '\n';
      for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
        out << '\n';
      }
    });
    written.push_back(path);
  };

  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : matching(root, "churn_")) {
      const Table t = read_table(p);
      for (const auto& r : t.rows) {
        rows.push_back({r[t.col("scheme")], r[t.col("c")], r[t.col("w")], r[t.col("t")],
                        r[t.col("churn")]});
      }
    }
    sort_rows(rows, {1, 2, 3});
    emit("fig2a.csv", {"scheme", "c", "w", "t", "churn"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    const fs::path p = root / "overutil.csv";
    if (fs::exists(p)) {
      const Table t = read_table(p);
      for (const auto& r : t.rows) {
        rows.push_back({r[t.col("t")], r[t.col("link")], r[t.col("overutil")]});
      }
    }
    emit("fig2b.csv", {"t", "link", "overutil"}, rows);
  }

  std::vector<std::vector<std::string>> summary;  // scheme,c,w,ratio
  for (const auto& p : matching(root, "summary_")) {
    const Table t = read_table(p);
    for (const auto& r : t.rows) {
      summary.push_back({r[t.col("scheme")], r[t.col("c")], r[t.col("w")],
                         r[t.col("mean_mlu_ratio")]});
    }
  }
  std::set<long long> cs, ws;
  for (const auto& r : summary) {
    cs.insert(std::stoll(r[1]));
    ws.insert(std::stoll(r[2]));
  }
  {
    // Ratio vs w at the smallest c.
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : summary) {
      if (!cs.empty() && std::stoll(r[1]) == *cs.begin()) rows.push_back({r[0], r[2], r[3]});
    }
    sort_rows(rows, {1});
    emit("fig3.csv", {"scheme", "w", "mean_mlu_ratio"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : summary) {
      if (r[0] == "drl") rows.push_back({r[1], r[2], r[3]});
    }
    sort_rows(rows, {0, 1});
    emit("fig4.csv", {"c", "w", "mean_mlu_ratio"}, rows);
  }

  std::vector<std::vector<std::string>> curves;  // c,w,epoch,reward,ratio
  for (const auto& p : matching(root, "learning_curve_")) {
    const Table t = read_table(p);
    for (const auto& r : t.rows) {
      curves.push_back({r[t.col("c")], r[t.col("w")], r[t.col("epoch")],
                        r[t.col("mean_reward")], r[t.col("mean_mlu_ratio")]});
    }
  }
  std::set<long long> curve_cs, curve_ws;
  for (const auto& r : curves) {
    curve_cs.insert(std::stoll(r[0]));
    curve_ws.insert(std::stoll(r[1]));
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : curves) {
      if (std::stoll(r[0]) == *curve_cs.begin()) rows.push_back({r[1], r[2], r[3], r[4]});
    }
    sort_rows(rows, {0, 1});
    emit("fig5a.csv", {"w", "epoch", "mean_reward", "mean_mlu_ratio"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : curves) {
      if (std::stoll(r[1]) == *curve_ws.begin()) rows.push_back({r[0], r[2], r[3], r[4]});
    }
    sort_rows(rows, {0, 1});
    emit("fig5b.csv", {"c", "epoch", "mean_reward", "mean_mlu_ratio"}, rows);
  }
  if (plot_script) {
    const std::string path = (figs / "plot_figures.py").string();
    write_file(path, [](std::ostream& out) { out << kPlotScript; });
    written.push_back(path);
  }
  return written;
}

}  // namespace robust_te
