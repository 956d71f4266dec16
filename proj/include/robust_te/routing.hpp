#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "robust_te/dataio.hpp"
#include "robust_te/lp.hpp"
#include "robust_te/netmodel.hpp"

namespace robust_te {

// Per-interval split ratios over a window of w intervals. Rates are indexed
// by flat candidate-path index; paths outside the allowed subset hold zero.
struct RateAllocation {
  std::size_t t0 = 0;
  std::size_t w = 1;
  std::vector<Eigen::VectorXd> rates;
  Eigen::VectorXd mlu;  // Z_t per interval
  double objective = 0.0;  // mean of mlu
};

inline constexpr double kRateSumTolerance = 1e-6;
inline constexpr double kMluTolerance = 1e-6;

// Sum over paths of rate * demand, per link.
Eigen::VectorXd link_loads(const Topology& topo, const CandidatePathSet& cps,
                           const Eigen::VectorXd& demand, const Eigen::VectorXd& rates);
Eigen::VectorXd link_utilizations(const Topology& topo, const CandidatePathSet& cps,
                                  const Eigen::VectorXd& demand, const Eigen::VectorXd& rates);
double max_link_utilization(const Topology& topo, const CandidatePathSet& cps,
                            const Eigen::VectorXd& demand, const Eigen::VectorXd& rates);

// Pairs with positive demand in at least one of `dms`.
std::vector<bool> demanded_pairs(std::span<const TrafficMatrix> dms, std::size_t num_pairs);

// Throws SolverError if rates do not sum to one per covered pair, are
// negative, sit outside `allowed`, or if a reported Z_t differs from the
// recomputed maximum utilization.
void check_allocation(const Topology& topo, const CandidatePathSet& cps,
                      std::span<const TrafficMatrix> dms, const PathSubset& allowed,
                      const RateAllocation& alloc);

// MLU-optimal split over every candidate path for one interval.
RateAllocation solve_mcf(const Topology& topo, const TrafficMatrix& dm,
                         const CandidatePathSet& cps);

// Minimizes the mean of Z_t over the window with paths restricted to
// `selected`. Throws PreconditionError naming the first demanded pair that
// has no selected path.
RateAllocation solve_robust_rates(const Topology& topo, std::span<const TrafficMatrix> dms,
                                  const CandidatePathSet& cps, const PathSubset& selected);

// The joint windowed LP: variables r_{p,t} for selected paths of demanded
// pairs (ordered by interval then flat index), followed by one Z_t per
// interval. Demands are normalized so the largest coefficient is one; the
// returned scale converts the LP objective back to utilization units.
struct RobustProblem {
  lp::ProblemD problem;
  double scale = 1.0;
};
RobustProblem build_robust_problem(const Topology& topo, std::span<const TrafficMatrix> dms,
                                   const CandidatePathSet& cps, const PathSubset& selected);

// Time-invariant split ratios minimizing the worst MLU over the training
// matrices (scenario LP, solved by adding violated scenarios until none remain).
struct ObliviousRouting {
  Eigen::VectorXd rates;
  double worst_training_mlu = 0.0;
  std::size_t scenarios_used = 0;
};
ObliviousRouting oblivious_rates(const Topology& topo, std::span<const TrafficMatrix> training,
                                 const CandidatePathSet& cps);

// Exhaustive search for the binary robust-path problem on tiny instances.
inline constexpr std::size_t kBruteForcePathLimit = 20;
struct BruteForceResult {
  PathSubset subset;
  RateAllocation allocation;
  double objective = 0.0;
  std::size_t subsets_evaluated = 0;
};
BruteForceResult brute_force_robust_paths(const Topology& topo,
                                          std::span<const TrafficMatrix> dms,
                                          const CandidatePathSet& cps, std::size_t r_size);

}  // namespace robust_te
