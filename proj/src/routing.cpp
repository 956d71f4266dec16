#include "robust_te/routing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "robust_te/errors.hpp"

namespace robust_te {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

std::string pair_label(const Topology& topo, const FlowPair& p) {
  return topo.node_name(p.src) + "->" + topo.node_name(p.dst);
}

// First selected path of a pair (lowest rank, i.e. shortest), if any.
std::optional<std::size_t> first_selected(const CandidatePathSet& cps, const PathSubset& sel,
                                          std::size_t pair) {
  for (std::size_t f = cps.first_of(pair); f < cps.end_of(pair); ++f) {
    if (sel.contains(f)) return f;
  }
  return std::nullopt;
}

void require_coverage(const Topology& topo, const CandidatePathSet& cps,
                      const PathSubset& selected, const std::vector<bool>& demanded) {
  for (std::size_t p = 0; p < cps.num_pairs(); ++p) {
    if (demanded[p] && !selected.covers(cps, p)) {
      throw PreconditionError("flow pair " + pair_label(topo, cps.pair(p)) +
                              " has demand but no selected path");
    }
  }
}

void require_matching_pairs(const CandidatePathSet& cps, std::span<const TrafficMatrix> dms) {
  for (const auto& dm : dms) {
    if (static_cast<std::size_t>(dm.demand.size()) != cps.num_pairs()) {
      throw PreconditionError("traffic matrix and candidate set disagree on the pair set");
    }
  }
}

}  // namespace

Eigen::VectorXd link_loads(const Topology& topo, const CandidatePathSet& cps,
                           const Eigen::VectorXd& demand, const Eigen::VectorXd& rates) {
  Eigen::VectorXd load = Eigen::VectorXd::Zero(idx(topo.num_links()));
  for (std::size_t f = 0; f < cps.num_paths(); ++f) {
    const double r = rates(idx(f));
    if (r == 0.0) continue;
    const double flow = r * demand(idx(cps.ref(f).pair));
    if (flow == 0.0) continue;
    for (LinkIndex l : cps.path(f).links) load(idx(l)) += flow;
  }
  return load;
}

Eigen::VectorXd link_utilizations(const Topology& topo, const CandidatePathSet& cps,
                                  const Eigen::VectorXd& demand, const Eigen::VectorXd& rates) {
  Eigen::VectorXd load = link_loads(topo, cps, demand, rates);
  for (LinkIndex l = 0; l < topo.num_links(); ++l) load(idx(l)) /= topo.link(l).capacity;
  return load;
}

double max_link_utilization(const Topology& topo, const CandidatePathSet& cps,
                            const Eigen::VectorXd& demand, const Eigen::VectorXd& rates) {
  if (topo.num_links() == 0) return 0.0;
  return link_utilizations(topo, cps, demand, rates).maxCoeff();
}

std::vector<bool> demanded_pairs(std::span<const TrafficMatrix> dms, std::size_t num_pairs) {
  std::vector<bool> out(num_pairs, false);
  for (const auto& dm : dms) {
    for (std::size_t p = 0; p < num_pairs; ++p) {
      if (dm.demand(idx(p)) > 0.0) out[p] = true;
    }
  }
  return out;
}

void check_allocation(const Topology& topo, const CandidatePathSet& cps,
                      std::span<const TrafficMatrix> dms, const PathSubset& allowed,
                      const RateAllocation& alloc) {
  if (alloc.rates.size() != dms.size() || static_cast<std::size_t>(alloc.mlu.size()) != dms.size()) {
    throw SolverError("allocation window size mismatch");
  }
  const std::vector<bool> demanded = demanded_pairs(dms, cps.num_pairs());
  double sum_z = 0.0;
  for (std::size_t t = 0; t < dms.size(); ++t) {
    const Eigen::VectorXd& r = alloc.rates[t];
    for (std::size_t p = 0; p < cps.num_pairs(); ++p) {
      double sum = 0.0;
      for (std::size_t f = cps.first_of(p); f < cps.end_of(p); ++f) {
        const double v = r(idx(f));
        if (v < 0.0) throw SolverError("negative rate in allocation");
        if (v > 0.0 && !allowed.contains(f)) throw SolverError("rate on a path outside the subset");
        sum += v;
      }
      const bool must_route = demanded[p] || allowed.covers(cps, p);
      if (must_route && std::abs(sum - 1.0) > kRateSumTolerance) {
        throw SolverError("rates of pair " + pair_label(topo, cps.pair(p)) + " sum to " +
                          std::to_string(sum));
      }
    }
    const double z = max_link_utilization(topo, cps, dms[t].demand, r);
    if (std::abs(z - alloc.mlu(idx(t))) > kMluTolerance * std::max(1.0, z)) {
      throw SolverError("reported MLU differs from recomputed link utilization");
    }
    sum_z += alloc.mlu(idx(t));
  }
  const double mean = dms.empty() ? 0.0 : sum_z / static_cast<double>(dms.size());
  if (std::abs(mean - alloc.objective) > kMluTolerance * std::max(1.0, mean)) {
    throw SolverError("allocation objective is not the mean MLU");
  }
}

RobustProblem build_robust_problem(const Topology& topo, std::span<const TrafficMatrix> dms,
                                   const CandidatePathSet& cps, const PathSubset& selected) {
  require_matching_pairs(cps, dms);
  require_coverage(topo, cps, selected, demanded_pairs(dms, cps.num_pairs()));
  const std::size_t w = dms.size();

  double scale = 0.0;
  for (const auto& dm : dms) {
    for (std::size_t f : selected.indices()) {
      const double d = dm.demand(idx(cps.ref(f).pair));
      if (d <= 0.0) continue;
      for (LinkIndex l : cps.path(f).links) scale = std::max(scale, d / topo.link(l).capacity);
    }
  }
  if (scale == 0.0) scale = 1.0;

  RobustProblem out;
  out.scale = scale;
  lp::ProblemD& lp = out.problem;
  for (std::size_t t = 0; t < w; ++t) {
    const Eigen::VectorXd& demand = dms[t].demand;
    std::vector<std::vector<std::pair<Index, double>>> link_terms(topo.num_links());
    for (std::size_t p = 0; p < cps.num_pairs(); ++p) {
      const double d = demand(idx(p));
      if (d <= 0.0) continue;
      const Index row = lp.add_constraint(lp::Sense::kEqual, 1.0,
                                          "split_t" + std::to_string(t) + "_k" + std::to_string(p));
      for (std::size_t f = cps.first_of(p); f < cps.end_of(p); ++f) {
        if (!selected.contains(f)) continue;
        const Index var = lp.add_variable(0.0, lp::ProblemD::kInfinity, 0.0,
                                          "r_t" + std::to_string(t) + "_p" + std::to_string(f));
        lp.add_term(row, var, 1.0);
        for (LinkIndex l : cps.path(f).links) {
          link_terms[l].emplace_back(var, d / (topo.link(l).capacity * scale));
        }
      }
    }
    const Index z = lp.add_variable(0.0, lp::ProblemD::kInfinity, 1.0 / static_cast<double>(w),
                                    "Z_t" + std::to_string(t));
    for (LinkIndex l = 0; l < topo.num_links(); ++l) {
      if (link_terms[l].empty()) continue;
      const Index row = lp.add_constraint(lp::Sense::kLessEqual, 0.0,
                                          "util_t" + std::to_string(t) + "_e" + std::to_string(l));
      for (const auto& [var, coef] : link_terms[l]) lp.add_term(row, var, coef);
      lp.add_term(row, z, -1.0);
    }
  }
  return out;
}

namespace {

// One interval of the windowed LP. The window's LP separates by interval
// (no constraint couples different t), so each is solved on its own.
struct IntervalResult {
  Eigen::VectorXd rates;
  double mlu = 0.0;
};

IntervalResult solve_interval(const Topology& topo, const TrafficMatrix& dm,
                              const CandidatePathSet& cps, const PathSubset& selected) {
  std::span<const TrafficMatrix> one(&dm, 1);
  RobustProblem rp = build_robust_problem(topo, one, cps, selected);
  const lp::SolutionD sol = lp::solve(rp.problem);
  if (sol.status != lp::Status::kOptimal) {
    throw SolverError(std::string("interval LP not solved: ") + lp::to_string(sol.status));
  }

  IntervalResult out;
  out.rates = Eigen::VectorXd::Zero(idx(cps.num_paths()));
  // Variables were created pair by pair in flat order, skipping unselected paths.
  Index var = 0;
  for (std::size_t p = 0; p < cps.num_pairs(); ++p) {
    if (dm.demand(idx(p)) > 0.0) {
      double sum = 0.0;
      for (std::size_t f = cps.first_of(p); f < cps.end_of(p); ++f) {
        if (!selected.contains(f)) continue;
        const double v = std::max(0.0, sol.values(var++));
        out.rates(idx(f)) = v;
        sum += v;
      }
      if (!(sum > 0.0)) throw SolverError("LP returned an empty split");
      for (std::size_t f = cps.first_of(p); f < cps.end_of(p); ++f) out.rates(idx(f)) /= sum;
    } else if (auto f = first_selected(cps, selected, p)) {
      out.rates(idx(*f)) = 1.0;
    }
  }
  const double lp_z = sol.values(var) * rp.scale;
  out.mlu = max_link_utilization(topo, cps, dm.demand, out.rates);
  if (std::abs(out.mlu - lp_z) > kMluTolerance * std::max(1.0, out.mlu)) {
    throw SolverError("LP MLU " + std::to_string(lp_z) + " disagrees with routed utilization " +
                      std::to_string(out.mlu));
  }
  return out;
}

}  // namespace

RateAllocation solve_robust_rates(const Topology& topo, std::span<const TrafficMatrix> dms,
                                  const CandidatePathSet& cps, const PathSubset& selected) {
  if (dms.empty()) throw PreconditionError("look-ahead window must hold at least one matrix");
  require_matching_pairs(cps, dms);
  require_coverage(topo, cps, selected, demanded_pairs(dms, cps.num_pairs()));

  RateAllocation alloc;
  alloc.t0 = dms.front().t;
  alloc.w = dms.size();
  alloc.mlu.resize(idx(dms.size()));
  for (std::size_t t = 0; t < dms.size(); ++t) {
    IntervalResult r = solve_interval(topo, dms[t], cps, selected);
    alloc.rates.push_back(std::move(r.rates));
    alloc.mlu(idx(t)) = r.mlu;
  }
  alloc.objective = alloc.mlu.mean();
  check_allocation(topo, cps, dms, selected, alloc);
  return alloc;
}

RateAllocation solve_mcf(const Topology& topo, const TrafficMatrix& dm,
                         const CandidatePathSet& cps) {
  return solve_robust_rates(topo, std::span<const TrafficMatrix>(&dm, 1), cps,
                            PathSubset::all(cps));
}

ObliviousRouting oblivious_rates(const Topology& topo, std::span<const TrafficMatrix> training,
                                 const CandidatePathSet& cps) {
  if (training.empty()) throw PreconditionError("oblivious routing needs training matrices");
  require_matching_pairs(cps, training);
  const std::vector<bool> demanded = demanded_pairs(training, cps.num_pairs());

  ObliviousRouting out;
  out.rates = Eigen::VectorXd::Zero(idx(cps.num_paths()));
  for (std::size_t p = 0; p < cps.num_pairs(); ++p) {
    if (!demanded[p]) out.rates(idx(cps.first_of(p))) = 1.0;
  }
  if (std::none_of(demanded.begin(), demanded.end(), [](bool b) { return b; })) return out;

  double scale = 0.0;
  for (const auto& dm : training) {
    for (std::size_t f = 0; f < cps.num_paths(); ++f) {
      const double d = dm.demand(idx(cps.ref(f).pair));
      for (LinkIndex l : cps.path(f).links) scale = std::max(scale, d / topo.link(l).capacity);
    }
  }

  lp::ProblemD lp;
  std::vector<Index> var_of(cps.num_paths(), -1);
  for (std::size_t p = 0; p < cps.num_pairs(); ++p) {
    if (!demanded[p]) continue;
    const Index row = lp.add_constraint(lp::Sense::kEqual, 1.0, "split_k" + std::to_string(p));
    for (std::size_t f = cps.first_of(p); f < cps.end_of(p); ++f) {
      var_of[f] = lp.add_variable(0.0, lp::ProblemD::kInfinity, 0.0, "r_p" + std::to_string(f));
      lp.add_term(row, var_of[f], 1.0);
    }
  }
  const Index u = lp.add_variable(0.0, lp::ProblemD::kInfinity, 1.0, "U");

  std::vector<bool> active(training.size(), false);
  auto add_scenario = [&](std::size_t k) {
    active[k] = true;
    std::vector<std::vector<std::pair<Index, double>>> terms(topo.num_links());
    for (std::size_t f = 0; f < cps.num_paths(); ++f) {
      if (var_of[f] < 0) continue;
      const double d = training[k].demand(idx(cps.ref(f).pair));
      if (d <= 0.0) continue;
      for (LinkIndex l : cps.path(f).links) {
        terms[l].emplace_back(var_of[f], d / (topo.link(l).capacity * scale));
      }
    }
    for (LinkIndex l = 0; l < topo.num_links(); ++l) {
      if (terms[l].empty()) continue;
      const Index row = lp.add_constraint(lp::Sense::kLessEqual, 0.0,
                                          "util_s" + std::to_string(k) + "_e" + std::to_string(l));
      for (const auto& [var, coef] : terms[l]) lp.add_term(row, var, coef);
      lp.add_term(row, u, -1.0);
    }
    ++out.scenarios_used;
  };

  // Seed with the heaviest matrix, then add the worst violated scenarios
  // until the current split is feasible for every training matrix.
  std::size_t heaviest = 0;
  for (std::size_t k = 1; k < training.size(); ++k) {
    if (training[k].demand.sum() > training[heaviest].demand.sum()) heaviest = k;
  }
  add_scenario(heaviest);
  constexpr std::size_t kScenariosPerRound = 8;
  while (true) {
    const lp::SolutionD sol = lp::solve(lp);
    if (sol.status != lp::Status::kOptimal) {
      throw SolverError(std::string("oblivious LP not solved: ") + lp::to_string(sol.status));
    }
    for (std::size_t p = 0; p < cps.num_pairs(); ++p) {
      if (!demanded[p]) continue;
      double sum = 0.0;
      for (std::size_t f = cps.first_of(p); f < cps.end_of(p); ++f) {
        out.rates(idx(f)) = std::max(0.0, sol.values(var_of[f]));
        sum += out.rates(idx(f));
      }
      for (std::size_t f = cps.first_of(p); f < cps.end_of(p); ++f) out.rates(idx(f)) /= sum;
    }
    const double bound = sol.values(u) * scale;

    std::vector<std::pair<double, std::size_t>> violated;
    double worst = 0.0;
    for (std::size_t k = 0; k < training.size(); ++k) {
      const double z = max_link_utilization(topo, cps, training[k].demand, out.rates);
      worst = std::max(worst, z);
      if (!active[k] && z > bound + kMluTolerance * std::max(1.0, bound)) {
        violated.emplace_back(-z, k);
      }
    }
    out.worst_training_mlu = worst;
    if (violated.empty()) break;
    std::sort(violated.begin(), violated.end());
    for (std::size_t i = 0; i < std::min(kScenariosPerRound, violated.size()); ++i) {
      add_scenario(violated[i].second);
    }
  }
  return out;
}

BruteForceResult brute_force_robust_paths(const Topology& topo,
                                          std::span<const TrafficMatrix> dms,
                                          const CandidatePathSet& cps, std::size_t r_size) {
  const std::size_t n = cps.num_paths();
  if (n > kBruteForcePathLimit) {
    throw PreconditionError("brute-force enumeration limited to " +
                            std::to_string(kBruteForcePathLimit) + " candidate paths, got " +
                            std::to_string(n));
  }
  require_matching_pairs(cps, dms);
  const std::vector<bool> demanded = demanded_pairs(dms, cps.num_pairs());
  const auto n_demanded = static_cast<std::size_t>(std::count(demanded.begin(), demanded.end(), true));
  if (n_demanded > r_size) {
    throw PreconditionError("|R| is smaller than the number of demanded pairs");
  }

  std::vector<std::uint32_t> pair_mask(cps.num_pairs(), 0);
  for (std::size_t f = 0; f < n; ++f) pair_mask[cps.ref(f).pair] |= 1u << f;

  BruteForceResult best;
  best.objective = std::numeric_limits<double>::infinity();
  const std::uint32_t end = 1u << n;
  for (std::uint32_t mask = 0; mask < end; ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > r_size) continue;
    bool covered = true;
    for (std::size_t p = 0; p < cps.num_pairs() && covered; ++p) {
      covered = !demanded[p] || (mask & pair_mask[p]) != 0;
    }
    if (!covered) continue;
    std::vector<std::size_t> chosen;
    for (std::size_t f = 0; f < n; ++f) {
      if (mask & (1u << f)) chosen.push_back(f);
    }
    PathSubset subset(std::move(chosen));
    RateAllocation alloc = solve_robust_rates(topo, dms, cps, subset);
    ++best.subsets_evaluated;
    if (alloc.objective < best.objective) {
      best.objective = alloc.objective;
      best.subset = std::move(subset);
      best.allocation = std::move(alloc);
    }
  }
  if (best.subsets_evaluated == 0) throw PreconditionError("no covering subset exists");
  return best;
}

}  // namespace robust_te
