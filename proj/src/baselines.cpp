#include "robust_te/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iterator>
#include <ostream>
#include <tuple>

#include "robust_te/errors.hpp"

namespace robust_te {

namespace {
Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }
}  // namespace

std::vector<PathId> used_paths(const CandidatePathSet& cps, const Eigen::VectorXd& rates) {
  std::vector<PathId> out;
  for (std::size_t f = 0; f < cps.num_paths(); ++f) {
    if (rates(idx(f)) > kPathUseThreshold) out.push_back(cps.path(f).id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t measure_churn(std::span<const PathId> before, std::span<const PathId> after) {
  std::vector<PathId> a(before.begin(), before.end());
  std::vector<PathId> b(after.begin(), after.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<PathId> diff;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
  return diff.size();
}

void SchemeResult::append(std::size_t interval, double z, std::vector<PathId> used) {
  churn.push_back(paths.empty() ? 0 : measure_churn(paths.back(), used));
  t.push_back(interval);
  mlu.push_back(z);
  paths.push_back(std::move(used));
}

void write_scheme_csv(std::span<const SchemeResult> results, std::ostream& out) {
  out << "scheme,t,mlu,churn,n_paths\n";
  out << std::setprecision(12);
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.t.size(); ++i) {
      out << r.scheme << ',' << r.t[i] << ',' << r.mlu[i] << ',' << r.churn[i] << ','
          << r.paths[i].size() << "\n";
    }
  }
}

Eigen::VectorXd ecmp_rates(const CandidatePathSet& cps) {
  Eigen::VectorXd rates = Eigen::VectorXd::Zero(idx(cps.num_paths()));
  for (std::size_t p = 0; p < cps.num_pairs(); ++p) {
    auto paths = cps.paths_of(p);
    const double best = paths.front().weight;  // candidates are weight-sorted
    std::size_t m = 0;
    while (m < paths.size() && paths[m].weight <= best * (1.0 + 1e-12)) ++m;
    for (std::size_t r = 0; r < m; ++r) {
      rates(idx(cps.flat_index(p, r))) = 1.0 / static_cast<double>(m);
    }
  }
  return rates;
}

EcmpAllocation ecmp_allocation(const Topology& topo, const TrafficMatrix& dm,
                               const CandidatePathSet& cps) {
  EcmpAllocation out;
  out.rates = ecmp_rates(cps);
  std::vector<std::size_t> chosen;
  for (std::size_t f = 0; f < cps.num_paths(); ++f) {
    if (out.rates(idx(f)) > 0.0) chosen.push_back(f);
  }
  out.paths = PathSubset(std::move(chosen));
  out.mlu = max_link_utilization(topo, cps, dm.demand, out.rates);
  return out;
}

SchemeResult mlu_optimal_trace(const Topology& topo, const TrafficTrace& trace,
                               const CandidatePathSet& cps, std::size_t begin, std::size_t end) {
  if (end == 0) end = trace.size();
  if (begin >= end || end > trace.size()) throw PreconditionError("invalid interval range");
  SchemeResult out;
  out.scheme = "mlu-optimal";
  for (std::size_t t = begin; t < end; ++t) {
    RateAllocation a = solve_mcf(topo, trace.at(t), cps);
    out.append(t, a.mlu(0), used_paths(cps, a.rates.front()));
  }
  return out;
}

HindsightResult hindsight_robust_paths(const Topology& topo, std::span<const TrafficMatrix> dms,
                                       const CandidatePathSet& cps, std::size_t r_size) {
  if (dms.empty()) throw PreconditionError("hindsight needs at least one future matrix");
  const std::vector<bool> demanded = demanded_pairs(dms, cps.num_pairs());
  const auto n_demanded =
      static_cast<std::size_t>(std::count(demanded.begin(), demanded.end(), true));
  if (r_size < n_demanded) {
    throw PreconditionError("|R| must be at least the number of demanded pairs");
  }

  std::vector<std::size_t> count(cps.num_paths(), 0);
  std::vector<double> volume(cps.num_paths(), 0.0);
  for (const auto& dm : dms) {
    const RateAllocation a = solve_mcf(topo, dm, cps);
    for (std::size_t f = 0; f < cps.num_paths(); ++f) {
      const double d = dm.demand(idx(cps.ref(f).pair));
      const double r = a.rates.front()(idx(f));
      if (d > 0.0 && r > kPathUseThreshold) ++count[f];
      volume[f] += r * d;
    }
  }

  std::vector<std::size_t> order(cps.num_paths());
  for (std::size_t f = 0; f < order.size(); ++f) order[f] = f;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::make_tuple(count[b], volume[b], cps.path(a).id) <
           std::make_tuple(count[a], volume[a], cps.path(b).id);
  });
  order.resize(std::min(r_size, order.size()));

  HindsightResult out;
  out.subset = PathSubset(std::move(order));
  for (std::size_t p = 0; p < cps.num_pairs(); ++p) {
    if (demanded[p] && !out.subset.covers(cps, p)) {
      out.subset.insert(cps.first_of(p));
      ++out.added_by_guard;
    }
  }
  out.allocation = solve_robust_rates(topo, dms, cps, out.subset);
  return out;
}

std::size_t calibrate_R(const Topology& topo, const TrafficTrace& trace,
                        const CandidatePathSet& cps) {
  if (trace.size() == 0) throw PreconditionError("calibration needs a nonempty trace");
  double total = 0.0;
  for (const auto& dm : trace.matrices) {
    const RateAllocation a = solve_mcf(topo, dm, cps);
    std::size_t used = 0;
    for (std::size_t f = 0; f < cps.num_paths(); ++f) {
      if (dm.demand(idx(cps.ref(f).pair)) > 0.0 && a.rates.front()(idx(f)) > kPathUseThreshold) {
        ++used;
      }
    }
    total += static_cast<double>(used);
  }
  const auto mean = static_cast<std::size_t>(std::llround(total / static_cast<double>(trace.size())));
  const std::vector<bool> demanded = demanded_pairs(trace.matrices, cps.num_pairs());
  const auto floor = static_cast<std::size_t>(std::count(demanded.begin(), demanded.end(), true));
  return std::max(mean, floor);
}

Eigen::VectorXd stale_path_overutilization(const Topology& topo, const CandidatePathSet& cps,
                                           const TrafficMatrix& dm_new,
                                           const Eigen::VectorXd& rates_old,
                                           const Eigen::VectorXd& rates_new) {
  return link_utilizations(topo, cps, dm_new.demand, rates_old) -
         link_utilizations(topo, cps, dm_new.demand, rates_new);
}

}  // namespace robust_te
