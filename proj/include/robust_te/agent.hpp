#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "robust_te/dataio.hpp"
#include "robust_te/netmodel.hpp"
#include "robust_te/policy.hpp"
#include "robust_te/routing.hpp"

namespace robust_te {

// Demand scaling applied when encoding states.
struct StateNormalizer {
  enum class Mode { kGlobalMax, kWindowMax };
  Mode mode = Mode::kGlobalMax;
  double scale = 1.0;  // divisor for kGlobalMax (largest training demand)
};

// Encodes the previous c matrices as a c x N x N tensor.
AgentState encode_state(std::span<const TrafficMatrix> dms, std::span<const FlowPair> pairs,
                        std::size_t num_nodes, std::size_t c, const StateNormalizer& normalizer);

Eigen::VectorXd policy_forward(const PolicyModel& model, const AgentState& state);

struct Action {
  std::vector<std::size_t> paths;       // flat candidate indices, in selection order
  std::vector<double> probabilities;    // renormalized draw probability of each selected path
  std::vector<bool> added_by_guard;
  double log_prob = 0.0;                // sum of log draw probabilities (policy picks only)

  std::size_t sampled_count() const;
  PathSubset subset() const { return PathSubset(paths); }
};

// Draws r_size distinct paths one at a time, renormalizing over the paths not
// yet drawn. `temperature` divides the logits before the softmax.
Action sample_action(const PolicyModel& model, const AgentState& state, std::size_t r_size,
                     std::mt19937_64& rng, double temperature = 1.0);
// Same draw from precomputed probabilities.
Action sample_action(const Eigen::VectorXd& probs, std::size_t r_size, std::mt19937_64& rng);

// Top r_size paths by probability, ties broken by smaller path id.
Action greedy_action(const PolicyModel& model, const AgentState& state, std::size_t r_size,
                     const CandidatePathSet& cps);

// Appends the shortest candidate of every demanded pair the action misses.
Action safe_guard(const Action& action, const std::vector<bool>& demanded,
                  const CandidatePathSet& cps);

inline constexpr double kRewardCap = 1e6;

struct RewardResult {
  double reward = 0.0;
  RateAllocation allocation;
};

// w / sum_t Z_t with rates optimized on the action's paths; kRewardCap for an
// all-zero window.
RewardResult compute_reward(const Topology& topo, std::span<const TrafficMatrix> dms,
                            const CandidatePathSet& cps, const Action& guarded);

struct Experience {
  AgentState state;
  std::size_t state_key = 0;  // window start; equal keys mean equal states
  Action action;
  double reward = 0.0;
};

// b(s): mean reward of the batch entries sharing the state key, or the
// batch-wide mean for keys seen once.
std::vector<double> batch_baselines(std::span<const Experience> batch);

// log pi(a|s) of the policy-drawn part of an action under the given logits.
double action_log_prob(const Eigen::VectorXd& probs, const Action& action);

// sum_i log pi(a_i|s_i) (r_i - b_i) + beta * H(pi(.|s_i)), and its gradient.
double surrogate_objective(const PolicyModel& model, std::span<const Experience> batch,
                           std::span<const double> baselines);
Eigen::VectorXd surrogate_gradient(const PolicyModel& model, std::span<const Experience> batch,
                                   std::span<const double> baselines);

struct UpdateReport {
  bool applied = false;
  double learning_rate = 0.0;
  double gradient_norm = 0.0;
  double mean_reward = 0.0;
};

// One gradient-ascent step with the scheduled learning rate. A non-finite
// gradient leaves the model untouched and reports applied = false.
UpdateReport reinforce_update(PolicyModel& model, std::span<const Experience> batch);

}  // namespace robust_te
