#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "robust_te/dataio.hpp"
#include "robust_te/netmodel.hpp"
#include "robust_te/routing.hpp"

namespace robust_te {

// A path counts as used when its split ratio exceeds this.
inline constexpr double kPathUseThreshold = 1e-4;

// Sorted ids of paths carrying a rate above kPathUseThreshold.
std::vector<PathId> used_paths(const CandidatePathSet& cps, const Eigen::VectorXd& rates);

// Size of the symmetric difference of two sorted id sets.
std::size_t measure_churn(std::span<const PathId> before, std::span<const PathId> after);

struct SchemeResult {
  std::string scheme;
  std::vector<std::size_t> t;
  std::vector<double> mlu;
  std::vector<std::vector<PathId>> paths;
  std::vector<std::size_t> churn;  // vs the previous row; zero for the first

  void append(std::size_t interval, double z, std::vector<PathId> used);
};

// Columns: scheme,t,mlu,churn,n_paths
void write_scheme_csv(std::span<const SchemeResult> results, std::ostream& out);

struct EcmpAllocation {
  PathSubset paths;
  Eigen::VectorXd rates;
  double mlu = 0.0;
};

// Equal split across the minimum-weight candidates of every pair.
Eigen::VectorXd ecmp_rates(const CandidatePathSet& cps);
EcmpAllocation ecmp_allocation(const Topology& topo, const TrafficMatrix& dm,
                               const CandidatePathSet& cps);

// Per-interval MLU-optimal routing over trace intervals [begin, end)
// (end = 0 means the whole trace).
SchemeResult mlu_optimal_trace(const Topology& topo, const TrafficTrace& trace,
                               const CandidatePathSet& cps, std::size_t begin = 0,
                               std::size_t end = 0);

struct HindsightResult {
  PathSubset subset;
  RateAllocation allocation;
  std::size_t added_by_guard = 0;  // paths beyond |R| needed for coverage
};

// Picks the |R| paths used most often by the per-interval optima of the
// window (ties: larger routed volume, then smaller path id), patches
// uncovered demanded pairs with their shortest candidate, then optimizes
// rates on that subset.
HindsightResult hindsight_robust_paths(const Topology& topo, std::span<const TrafficMatrix> dms,
                                       const CandidatePathSet& cps, std::size_t r_size);

// Mean number of used paths per interval under MLU-optimal routing,
// rounded, and at least the number of pairs with demand in the trace.
std::size_t calibrate_R(const Topology& topo, const TrafficTrace& trace,
                        const CandidatePathSet& cps);

// Per-link utilization under the old rates minus under the new rates, both
// carrying the new demand.
Eigen::VectorXd stale_path_overutilization(const Topology& topo, const CandidatePathSet& cps,
                                           const TrafficMatrix& dm_new,
                                           const Eigen::VectorXd& rates_old,
                                           const Eigen::VectorXd& rates_new);

}  // namespace robust_te
