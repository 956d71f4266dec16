#include "robust_te/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "robust_te/errors.hpp"

namespace robust_te {

std::vector<TrafficMatrix> TrafficTrace::window(std::size_t begin, std::size_t count) const {
  if (begin + count > matrices.size()) throw DataError("trace window out of range");
  return {matrices.begin() + static_cast<std::ptrdiff_t>(begin),
          matrices.begin() + static_cast<std::ptrdiff_t>(begin + count)};
}

double TrafficTrace::max_demand() const {
  double m = 0.0;
  for (const auto& tm : matrices) {
    if (tm.demand.size() > 0) m = std::max(m, tm.demand.maxCoeff());
  }
  return m;
}

void validate_trace(const TrafficTrace& trace) {
  if (!std::is_sorted(trace.pairs.begin(), trace.pairs.end()) ||
      std::adjacent_find(trace.pairs.begin(), trace.pairs.end()) != trace.pairs.end()) {
    throw DataError("trace pair set must be sorted and unique");
  }
  for (const auto& p : trace.pairs) {
    if (p.src == p.dst) throw DataError("trace pair with identical endpoints");
  }
  if (!(trace.interval_seconds > 0.0)) throw DataError("interval duration must be positive");
  for (std::size_t i = 0; i < trace.matrices.size(); ++i) {
    const auto& tm = trace.matrices[i];
    if (tm.t != i) throw DataError("trace interval indices must be contiguous from 0");
    if (static_cast<std::size_t>(tm.demand.size()) != trace.pairs.size()) {
      throw DataError("traffic matrix size does not match the pair set");
    }
    if (!tm.demand.allFinite() || (tm.demand.array() < 0.0).any()) {
      throw DataError("negative or non-finite demand at interval " + std::to_string(i));
    }
  }
}

TraceFormat parse_trace_format(const std::string& name) {
  if (name == "csv") return TraceFormat::kCsv;
  if (name == "abilene") return TraceFormat::kAbilene;
  throw ConfigError("unknown trace format '" + name + "'");
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) {
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
  }
  return out;
}

double parse_number(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("malformed number '" + s + "' at line " + std::to_string(line_no));
  }
}

}  // namespace

TrafficTrace read_trace_csv(std::istream& in, const Topology& topo,
                            const TraceLoadOptions& options) {
  TrafficTrace trace;
  trace.interval_seconds = options.interval_seconds;

  struct Row {
    std::size_t t;
    FlowPair pair;
    double demand;
  };
  std::vector<Row> rows;
  std::set<std::pair<std::size_t, FlowPair>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind('#', 0) == 0) {
      constexpr std::string_view kKey = "interval_seconds=";
      auto pos = line.find(kKey);
      if (pos != std::string::npos) {
        trace.interval_seconds = parse_number(line.substr(pos + kKey.size()), line_no);
      }
      continue;
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = split_fields(line, ',');
    if (f.size() != 4) throw DataError("malformed trace row at line " + std::to_string(line_no));
    if (f[0] == "t") continue;  // header

    double t = parse_number(f[0], line_no);
    if (t < 0 || std::floor(t) != t) {
      throw DataError("interval index must be a nonnegative integer at line " +
                      std::to_string(line_no));
    }
    auto src = topo.find_node(f[1]);
    auto dst = topo.find_node(f[2]);
    if (!src || !dst) {
      throw DataError("trace row references unknown node at line " + std::to_string(line_no));
    }
    if (*src == *dst) throw DataError("self pair at line " + std::to_string(line_no));
    double demand = parse_number(f[3], line_no) * options.unit_scale;
    if (!(demand >= 0.0) || !std::isfinite(demand)) {
      throw DataError("negative demand at line " + std::to_string(line_no));
    }
    Row row{static_cast<std::size_t>(t), FlowPair{*src, *dst}, demand};
    if (!seen.emplace(row.t, row.pair).second) {
      throw DataError("duplicate (t, src, dst) at line " + std::to_string(line_no));
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw DataError("trace contains no rows");

  std::set<FlowPair> pairs;
  std::size_t length = 0;
  for (const auto& r : rows) {
    pairs.insert(r.pair);
    length = std::max(length, r.t + 1);
  }
  trace.pairs.assign(pairs.begin(), pairs.end());
  std::vector<bool> present(length, false);
  trace.matrices.resize(length);
  for (std::size_t t = 0; t < length; ++t) {
    trace.matrices[t].t = t;
    trace.matrices[t].demand = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pairs.size()));
  }
  for (const auto& r : rows) {
    auto idx = std::lower_bound(trace.pairs.begin(), trace.pairs.end(), r.pair) -
               trace.pairs.begin();
    trace.matrices[r.t].demand(idx) = r.demand;
    present[r.t] = true;
  }
  for (std::size_t t = 0; t < length; ++t) {
    if (!present[t]) throw DataError("trace is missing interval " + std::to_string(t));
  }
  validate_trace(trace);
  return trace;
}

TrafficTrace read_trace_abilene(std::istream& in, const Topology& topo,
                                const TraceLoadOptions& options) {
  const std::size_t n = topo.num_nodes();
  TrafficTrace trace;
  trace.interval_seconds = options.interval_seconds;
  for (NodeIndex s = 0; s < n; ++s) {
    for (NodeIndex d = 0; d < n; ++d) {
      if (s != d) trace.pairs.push_back(FlowPair{s, d});
    }
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream row(line);
    std::vector<double> values;
    std::string tok;
    while (row >> tok) values.push_back(parse_number(tok, line_no));
    std::size_t stride = 0;
    if (values.size() == n * n) {
      stride = 1;
    } else if (values.size() == 5 * n * n) {
      stride = 5;
    } else {
      throw DataError("abilene row has " + std::to_string(values.size()) + " values at line " +
                      std::to_string(line_no));
    }
    TrafficMatrix tm;
    tm.t = trace.matrices.size();
    tm.demand.resize(static_cast<Eigen::Index>(trace.pairs.size()));
    for (std::size_t i = 0; i < trace.pairs.size(); ++i) {
      const auto& p = trace.pairs[i];
      double v = values[(p.src * n + p.dst) * stride] * options.unit_scale;
      if (!(v >= 0.0)) throw DataError("negative demand at line " + std::to_string(line_no));
      tm.demand(static_cast<Eigen::Index>(i)) = v;
    }
    trace.matrices.push_back(std::move(tm));
  }
  if (trace.matrices.empty()) throw DataError("abilene trace contains no rows");
  validate_trace(trace);
  return trace;
}

TrafficTrace load_trace(const std::string& path, TraceFormat format, const Topology& topo,
                        const TraceLoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace file " + path);
  return format == TraceFormat::kCsv ? read_trace_csv(in, topo, options)
                                     : read_trace_abilene(in, topo, options);
}

void write_trace_csv(const TrafficTrace& trace, const Topology& topo, std::ostream& out) {
  out << "# interval_seconds=" << trace.interval_seconds << "\n";
  out << "t,src,dst,demand\n";
  out << std::setprecision(17);
  for (const auto& tm : trace.matrices) {
    for (std::size_t i = 0; i < trace.pairs.size(); ++i) {
      out << tm.t << ',' << topo.node_name(trace.pairs[i].src) << ','
          << topo.node_name(trace.pairs[i].dst) << ',' << tm.demand(static_cast<Eigen::Index>(i))
          << "\n";
    }
  }
}

TrafficTrace scale_trace(const TrafficTrace& trace, double factor) {
  if (!(factor > 0.0)) throw DataError("scale factor must be positive");
  TrafficTrace out = trace;
  for (auto& tm : out.matrices) tm.demand *= factor;
  return out;
}

std::vector<FlowPair> connected_pairs(const Topology& topo) {
  std::vector<FlowPair> pairs;
  for (NodeIndex s = 0; s < topo.num_nodes(); ++s) {
    std::vector<bool> seen(topo.num_nodes(), false);
    std::vector<NodeIndex> stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      NodeIndex v = stack.back();
      stack.pop_back();
      for (LinkIndex l : topo.out_links(v)) {
        NodeIndex u = topo.link(l).dst;
        if (!seen[u]) {
          seen[u] = true;
          stack.push_back(u);
        }
      }
    }
    for (NodeIndex d = 0; d < topo.num_nodes(); ++d) {
      if (d != s && seen[d]) pairs.push_back(FlowPair{s, d});
    }
  }
  return pairs;
}

SynthPattern parse_synth_pattern(const std::string& name) {
  if (name == "periodic") return SynthPattern::kPeriodic;
  if (name == "gravity") return SynthPattern::kGravity;
  if (name == "regime-switch") return SynthPattern::kRegimeSwitch;
  throw ConfigError("unknown synthetic pattern '" + name + "'");
}

std::string to_string(SynthPattern pattern) {
  switch (pattern) {
    case SynthPattern::kPeriodic: return "periodic";
    case SynthPattern::kGravity: return "gravity";
    case SynthPattern::kRegimeSwitch: return "regime-switch";
  }
  return "?";
}

Eigen::VectorXd gravity_matrix(std::span<const FlowPair> pairs, const Eigen::VectorXd& out_mass,
                               const Eigen::VectorXd& in_mass, double total) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    d(static_cast<Eigen::Index>(i)) = out_mass(static_cast<Eigen::Index>(pairs[i].src)) *
                                      in_mass(static_cast<Eigen::Index>(pairs[i].dst));
  }
  const double sum = d.sum();
  if (sum > 0.0) d *= total / sum;
  return d;
}

TrafficTrace regime_switch_trace(std::vector<FlowPair> pairs,
                                 const std::vector<Eigen::VectorXd>& regimes, std::size_t length,
                                 std::size_t period, double noise, std::uint64_t seed,
                                 double interval_seconds) {
  if (regimes.empty()) throw DataError("at least one regime is required");
  if (period == 0) throw DataError("regime period must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  TrafficTrace trace;
  trace.pairs = std::move(pairs);
  trace.interval_seconds = interval_seconds;
  for (std::size_t t = 0; t < length; ++t) {
    const Eigen::VectorXd& base = regimes[(t / period) % regimes.size()];
    TrafficMatrix tm{t, base};
    for (Eigen::Index i = 0; i < tm.demand.size(); ++i) {
      tm.demand(i) *= 1.0 + noise * jitter(rng);
    }
    trace.matrices.push_back(std::move(tm));
  }
  validate_trace(trace);
  return trace;
}

namespace {

// Total demand that would load every link to `load` if spread evenly over
// shortest paths.
double target_total(const Topology& topo, std::span<const FlowPair> pairs, double load) {
  double cap = 0.0;
  for (const auto& l : topo.links()) cap += l.capacity;
  double hops = 0.0;
  for (const auto& p : pairs) hops += static_cast<double>(shortest_path(topo, p).links.size());
  const double mean_hops = pairs.empty() ? 1.0 : hops / static_cast<double>(pairs.size());
  return load * cap / mean_hops;
}

Eigen::VectorXd draw_masses(std::size_t n, std::mt19937_64& rng, bool uniform) {
  if (uniform) return Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  std::uniform_real_distribution<double> mass(0.2, 1.8);
  Eigen::VectorXd m(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = mass(rng);
  return m;
}

}  // namespace

TrafficTrace synth_trace(const Topology& topo, const SynthOptions& options) {
  if (options.length == 0) throw DataError("synthetic trace length must be at least 1");
  if (options.period == 0) throw DataError("synthetic period must be positive");
  std::vector<FlowPair> pairs = connected_pairs(topo);
  if (pairs.empty()) throw DataError("topology has no connected pairs");
  const double total = target_total(topo, pairs, options.load);
  const std::size_t n = topo.num_nodes();

  std::mt19937_64 rng(options.seed);
  const Eigen::VectorXd out0 = draw_masses(n, rng, options.uniform_masses);
  const Eigen::VectorXd in0 = draw_masses(n, rng, options.uniform_masses);
  const Eigen::VectorXd base = gravity_matrix(pairs, out0, in0, total);

  switch (options.pattern) {
    case SynthPattern::kGravity:
      return regime_switch_trace(pairs, {base}, options.length, options.period, options.noise,
                                 rng(), options.interval_seconds);
    case SynthPattern::kRegimeSwitch: {
      const Eigen::VectorXd out1 = draw_masses(n, rng, false);
      const Eigen::VectorXd in1 = draw_masses(n, rng, false);
      return regime_switch_trace(pairs, {base, gravity_matrix(pairs, out1, in1, total)},
                                 options.length, options.period, options.noise, rng(),
                                 options.interval_seconds);
    }
    case SynthPattern::kPeriodic: {
      // Per-interval matrices: base * (1 + amplitude * sin(2 pi t / period)).
      std::vector<Eigen::VectorXd> cycle;
      for (std::size_t t = 0; t < options.period; ++t) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) /
                             static_cast<double>(options.period);
        cycle.push_back(base * (1.0 + options.amplitude * std::sin(phase)));
      }
      return regime_switch_trace(pairs, cycle, options.length, 1, options.noise, rng(),
                                 options.interval_seconds);
    }
  }
  throw DataError("unknown synthetic pattern");
}

Topology random_capacities(const Topology& topo, double lo, double hi, std::uint64_t seed) {
  if (!(lo > 0.0) || !(lo <= hi)) throw DataError("capacity range requires 0 < lo <= hi");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> caps(topo.num_links());
  for (double& c : caps) c = lo == hi ? lo : std::clamp(dist(rng), lo, hi);
  return topo.with_capacities(caps);
}

std::vector<std::size_t> usable_starts(std::size_t length, std::size_t w, std::size_t c) {
  std::vector<std::size_t> starts;
  if (w == 0) return starts;
  for (std::size_t t = c; t + w <= length; ++t) starts.push_back(t);
  return starts;
}

TraceSplit split_trace(const TrafficTrace& trace, double train_frac, std::size_t w,
                       std::size_t c, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw ConfigError("train fraction must lie strictly between 0 and 1");
  }
  if (w == 0) throw ConfigError("look-ahead window w must be at least 1");
  std::vector<std::size_t> starts = usable_starts(trace.size(), w, c);
  if (starts.empty()) {
    throw DataError("trace of length " + std::to_string(trace.size()) +
                    " is too short for c=" + std::to_string(c) + ", w=" + std::to_string(w));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(starts.begin(), starts.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_frac * static_cast<double>(starts.size())));
  TraceSplit split;
  split.seed = seed;
  split.train.assign(starts.begin(), starts.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(starts.begin() + static_cast<std::ptrdiff_t>(n_train), starts.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace robust_te
