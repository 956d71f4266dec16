#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "robust_te/netmodel.hpp"

namespace robust_te {

// Demand of one interval, indexed like the owning trace's pair list.
struct TrafficMatrix {
  std::size_t t = 0;
  Eigen::VectorXd demand;
};

struct TrafficTrace {
  std::vector<FlowPair> pairs;  // sorted, unique
  std::vector<TrafficMatrix> matrices;
  double interval_seconds = 300.0;

  std::size_t size() const { return matrices.size(); }
  const TrafficMatrix& at(std::size_t t) const { return matrices.at(t); }
  std::vector<TrafficMatrix> window(std::size_t begin, std::size_t count) const;
  double max_demand() const;
};

// Throws DataError when the trace violates its invariants.
void validate_trace(const TrafficTrace& trace);

enum class TraceFormat { kCsv, kAbilene };

TraceFormat parse_trace_format(const std::string& name);

struct TraceLoadOptions {
  double interval_seconds = 300.0;
  // Multiplier applied to raw values. For the Abilene archive (100-byte units
  // per 5-minute bin) 800/300 converts to bits per second.
  double unit_scale = 1.0;
};

// CSV: optional `# interval_seconds=S` line, optional header `t,src,dst,demand`,
// then one row per (interval, pair). Pairs missing from an interval are zero.
// Abilene: one line per interval holding N*N (or 5*N*N, first of every five
// used) values in node-name order.
TrafficTrace load_trace(const std::string& path, TraceFormat format, const Topology& topo,
                        const TraceLoadOptions& options = {});
TrafficTrace read_trace_csv(std::istream& in, const Topology& topo,
                            const TraceLoadOptions& options = {});
TrafficTrace read_trace_abilene(std::istream& in, const Topology& topo,
                                const TraceLoadOptions& options = {});
void write_trace_csv(const TrafficTrace& trace, const Topology& topo, std::ostream& out);

TrafficTrace scale_trace(const TrafficTrace& trace, double factor);

// All ordered pairs (s != d) with at least one path.
std::vector<FlowPair> connected_pairs(const Topology& topo);

enum class SynthPattern { kPeriodic, kGravity, kRegimeSwitch };

SynthPattern parse_synth_pattern(const std::string& name);
std::string to_string(SynthPattern pattern);

struct SynthOptions {
  SynthPattern pattern = SynthPattern::kGravity;
  std::size_t length = 48;
  std::uint64_t seed = 1;
  std::size_t period = 12;       // regime length, or cycle length for periodic
  double load = 0.3;             // target mean link load if traffic spread evenly
  double noise = 0.05;           // multiplicative uniform noise amplitude
  double amplitude = 0.5;        // periodic swing
  bool uniform_masses = false;   // gravity masses all one
  double interval_seconds = 300.0;
};

TrafficTrace synth_trace(const Topology& topo, const SynthOptions& options);

// Gravity model: demand(s,d) proportional to out_mass[s] * in_mass[d],
// normalized so the entries sum to `total`.
Eigen::VectorXd gravity_matrix(std::span<const FlowPair> pairs, const Eigen::VectorXd& out_mass,
                               const Eigen::VectorXd& in_mass, double total);

// Alternates through `regimes` every `period` intervals; each entry gets
// independent multiplicative noise in [1 - noise, 1 + noise].
TrafficTrace regime_switch_trace(std::vector<FlowPair> pairs,
                                 const std::vector<Eigen::VectorXd>& regimes, std::size_t length,
                                 std::size_t period, double noise, std::uint64_t seed,
                                 double interval_seconds = 300.0);

Topology random_capacities(const Topology& topo, double lo, double hi, std::uint64_t seed);

struct TraceSplit {
  std::vector<std::size_t> train;  // window start indices, ascending
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

// Window starts t satisfy t >= c (a full state is available) and t + w <= length.
std::vector<std::size_t> usable_starts(std::size_t length, std::size_t w, std::size_t c);
TraceSplit split_trace(const TrafficTrace& trace, double train_frac, std::size_t w,
                       std::size_t c, std::uint64_t seed);

}  // namespace robust_te
