#include "robust_te/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "robust_te/errors.hpp"

namespace robust_te {

namespace {
using Index = Eigen::Index;
Index idx(std::size_t i) { return static_cast<Index>(i); }
}  // namespace

AgentState encode_state(std::span<const TrafficMatrix> dms, std::span<const FlowPair> pairs,
                        std::size_t num_nodes, std::size_t c, const StateNormalizer& normalizer) {
  if (dms.size() != c) {
    throw PreconditionError("state needs exactly " + std::to_string(c) + " matrices, got " +
                            std::to_string(dms.size()));
  }
  AgentState s;
  s.channels = c;
  s.grid = num_nodes;
  s.values = Eigen::VectorXd::Zero(idx(c * num_nodes * num_nodes));
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (static_cast<std::size_t>(dms[ch].demand.size()) != pairs.size()) {
      throw PreconditionError("traffic matrix does not match the pair set");
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      s.values(idx(ch * num_nodes * num_nodes + pairs[p].src * num_nodes + pairs[p].dst)) =
          dms[ch].demand(idx(p));
    }
  }
  double divisor = normalizer.mode == StateNormalizer::Mode::kGlobalMax
                       ? normalizer.scale
                       : (s.values.size() ? s.values.maxCoeff() : 0.0);
  if (divisor > 0.0) s.values /= divisor;
  return s;
}

Eigen::VectorXd policy_forward(const PolicyModel& model, const AgentState& state) {
  return model.probabilities(state);
}

std::size_t Action::sampled_count() const {
  return static_cast<std::size_t>(std::count(added_by_guard.begin(), added_by_guard.end(), false));
}

Action sample_action(const PolicyModel& model, const AgentState& state, std::size_t r_size,
                     std::mt19937_64& rng, double temperature) {
  if (!(temperature > 0.0)) throw PreconditionError("temperature must be positive");
  const Eigen::VectorXd z = model.logits(state) / temperature;
  const std::size_t n = static_cast<std::size_t>(z.size());
  if (r_size > n) throw PreconditionError("|R| exceeds the number of candidate paths");

  // Renormalize over the free logits at each draw so a sharp softmax cannot
  // underflow the remaining mass to zero.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<bool> taken(n, false);
  Eigen::VectorXd weight(z.size());
  Action a;
  for (std::size_t draw = 0; draw < r_size; ++draw) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) top = std::max(top, z(idx(i)));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      weight(idx(i)) = taken[i] ? 0.0 : std::exp(z(idx(i)) - top);
      total += weight(idx(i));
    }
    const double u = unit(rng) * total;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      pick = i;
      acc += weight(idx(i));
      if (u < acc) break;
    }
    taken[pick] = true;
    const double p = weight(idx(pick)) / total;
    a.paths.push_back(pick);
    a.probabilities.push_back(p);
    a.added_by_guard.push_back(false);
    a.log_prob += std::log(p);
  }
  return a;
}

Action sample_action(const Eigen::VectorXd& probs, std::size_t r_size, std::mt19937_64& rng) {
  const std::size_t n = static_cast<std::size_t>(probs.size());
  if (r_size > n) throw PreconditionError("|R| exceeds the number of candidate paths");

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<bool> taken(n, false);
  Action a;
  for (std::size_t draw = 0; draw < r_size; ++draw) {
    double remaining = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) remaining += probs(idx(i));
    }
    const double u = unit(rng) * remaining;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      pick = i;  // falls back to the last free path on rounding
      acc += probs(idx(i));
      if (u < acc) break;
    }
    taken[pick] = true;
    const double p = probs(idx(pick)) / remaining;
    a.paths.push_back(pick);
    a.probabilities.push_back(p);
    a.added_by_guard.push_back(false);
    a.log_prob += std::log(p);
  }
  return a;
}

Action greedy_action(const PolicyModel& model, const AgentState& state, std::size_t r_size,
                     const CandidatePathSet& cps) {
  const Eigen::VectorXd probs = policy_forward(model, state);
  const std::size_t n = static_cast<std::size_t>(probs.size());
  if (n != cps.num_paths()) throw PreconditionError("model outputs do not match candidate set");
  if (r_size > n) throw PreconditionError("|R| exceeds the number of candidate paths");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (probs(idx(a)) != probs(idx(b))) return probs(idx(a)) > probs(idx(b));
    return cps.path(a).id < cps.path(b).id;
  });
  Action a;
  double remaining = 1.0;
  for (std::size_t i = 0; i < r_size; ++i) {
    const double p = probs(idx(order[i])) / remaining;
    a.paths.push_back(order[i]);
    a.probabilities.push_back(p);
    a.added_by_guard.push_back(false);
    a.log_prob += std::log(p);
    remaining -= probs(idx(order[i]));
  }
  return a;
}

Action safe_guard(const Action& action, const std::vector<bool>& demanded,
                  const CandidatePathSet& cps) {
  Action out = action;
  const PathSubset chosen = action.subset();
  for (std::size_t p = 0; p < cps.num_pairs(); ++p) {
    if (p < demanded.size() && demanded[p] && !chosen.covers(cps, p)) {
      out.paths.push_back(cps.first_of(p));
      out.probabilities.push_back(0.0);
      out.added_by_guard.push_back(true);
    }
  }
  return out;
}

RewardResult compute_reward(const Topology& topo, std::span<const TrafficMatrix> dms,
                            const CandidatePathSet& cps, const Action& guarded) {
  RewardResult r;
  r.allocation = solve_robust_rates(topo, dms, cps, guarded.subset());
  const double total = r.allocation.mlu.sum();
  r.reward = total > 0.0 ? std::min(kRewardCap, static_cast<double>(dms.size()) / total)
                         : kRewardCap;
  return r;
}

std::vector<double> batch_baselines(std::span<const Experience> batch) {
  std::map<std::size_t, std::pair<double, std::size_t>> by_key;
  double total = 0.0;
  for (const auto& e : batch) {
    auto& [sum, count] = by_key[e.state_key];
    sum += e.reward;
    ++count;
    total += e.reward;
  }
  const double mean = batch.empty() ? 0.0 : total / static_cast<double>(batch.size());
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& e : batch) {
    const auto& [sum, count] = by_key[e.state_key];
    out.push_back(count > 1 ? sum / static_cast<double>(count) : mean);
  }
  return out;
}

double action_log_prob(const Eigen::VectorXd& probs, const Action& action) {
  double lp = 0.0;
  double remaining = 1.0;
  for (std::size_t i = 0; i < action.paths.size(); ++i) {
    if (action.added_by_guard[i]) continue;
    const double p = probs(idx(action.paths[i]));
    lp += std::log(p / remaining);
    remaining -= p;
  }
  return lp;
}

namespace {

double entropy(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (Index k = 0; k < p.size(); ++k) {
    if (p(k) > 0.0) h -= p(k) * std::log(p(k));
  }
  return h;
}

// Gradient with respect to the logits of log pi(a|s) * advantage + beta * H.
Eigen::VectorXd logit_gradient(const Eigen::VectorXd& probs, const Action& action,
                               double advantage, double beta) {
  const Index n = probs.size();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  if (advantage != 0.0) {
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    double taken_mass = 0.0;
    for (std::size_t i = 0; i < action.paths.size(); ++i) {
      if (action.added_by_guard[i]) continue;
      const std::size_t a = action.paths[i];
      // d log p_a = e_a - p
      Eigen::VectorXd term = -probs;
      term(idx(a)) += 1.0;
      if (taken_mass > 0.0) {
        // d[-log(1 - S)] with S the mass already drawn: (p_k [k taken] - S p_k) / (1 - S)
        double free_mass = 0.0;
        for (Index k = 0; k < n; ++k) {
          if (!taken[static_cast<std::size_t>(k)]) free_mass += probs(k);
        }
        for (Index k = 0; k < n; ++k) {
          const double in_prev = taken[static_cast<std::size_t>(k)] ? probs(k) : 0.0;
          term(k) += (in_prev - taken_mass * probs(k)) / free_mass;
        }
      }
      g += advantage * term;
      taken[a] = true;
      taken_mass += probs(idx(a));
    }
  }
  if (beta != 0.0) {
    const double h = entropy(probs);
    for (Index k = 0; k < n; ++k) {
      const double lp = probs(k) > 0.0 ? std::log(probs(k)) : 0.0;
      g(k) -= beta * probs(k) * (lp + h);
    }
  }
  return g;
}

}  // namespace

double surrogate_objective(const PolicyModel& model, std::span<const Experience> batch,
                           std::span<const double> baselines) {
  const double beta = model.settings().entropy_beta;
  double j = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd probs = policy_forward(model, batch[i].state);
    j += action_log_prob(probs, batch[i].action) * (batch[i].reward - baselines[i]);
    j += beta * entropy(probs);
  }
  return j;
}

Eigen::VectorXd surrogate_gradient(const PolicyModel& model, std::span<const Experience> batch,
                                   std::span<const double> baselines) {
  const double beta = model.settings().entropy_beta;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.parameters().size());
  // Backpropagation is linear in the logit gradient, so experiences sharing a
  // state need one forward and one backward pass.
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.size(); ++i) groups[batch[i].state_key].push_back(i);
  for (const auto& [key, members] : groups) {
    PolicyModel::Cache cache;
    const Eigen::VectorXd probs = softmax(model.logits(batch[members.front()].state, &cache));
    Eigen::VectorXd g = Eigen::VectorXd::Zero(probs.size());
    bool any = false;
    for (auto i : members) {
      const double advantage = batch[i].reward - baselines[i];
      if (advantage == 0.0 && beta == 0.0) continue;
      g += logit_gradient(probs, batch[i].action, advantage, beta);
      any = true;
    }
    if (any) grad += model.backward(cache, g);
  }
  return grad;
}

UpdateReport reinforce_update(PolicyModel& model, std::span<const Experience> batch) {
  if (batch.empty()) throw PreconditionError("REINFORCE update needs a nonempty batch");
  UpdateReport report;
  const std::vector<double> baselines = batch_baselines(batch);
  for (const auto& e : batch) report.mean_reward += e.reward;
  report.mean_reward /= static_cast<double>(batch.size());

  const Eigen::VectorXd grad = surrogate_gradient(model, batch, baselines);
  report.gradient_norm = grad.norm();
  report.learning_rate = lr_schedule(model.step(), model.settings());
  if (!grad.allFinite()) return report;
  model.parameters() += report.learning_rate * grad;
  model.set_step(model.step() + 1);
  report.applied = true;
  return report;
}

}  // namespace robust_te
