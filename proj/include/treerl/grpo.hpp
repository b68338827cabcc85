#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "treerl/policy.hpp"
#include "treerl/trajectory.hpp"

namespace treerl {

enum class AdvantageMode { outcome, node_raw, node_standard, node_mean_only };

/// Outer weighting of the objective: trajectory -> node -> token means, or a
/// single global token mean.
enum class LossAggregation { node_mean, token_mean };

struct TrainParams {
  double eps_q = 1.0;           // soft-clip temperature
  double q_max = 1.0;           // soft-clip magnitude bound
  double eps_low = 0.2;         // ratio clip, lower
  double eps_high = 0.28;       // ratio clip, higher (Clip-Higher)
  AdvantageMode advantage_mode = AdvantageMode::node_mean_only;
  double sigma_floor = 1e-8;    // node_standard denominator guard
  double learning_rate = 1e-3;
  int max_trajectory_tokens = 4096;
  double overlong_penalty = 1.0;
  LossAggregation loss_aggregation = LossAggregation::node_mean;

  void validate() const;
};

/// Bounded, order-preserving squash of accumulated q-values. Terminal
/// rewards are never passed through this.
inline double soft_clip_q(double q_raw, double eps_q, double q_max) {
  if (!(eps_q > 0.0)) throw ContractViolation("soft_clip_q: eps_q must be > 0");
  if (!(q_max > 0.0)) throw ContractViolation("soft_clip_q: q_max must be > 0");
  return std::tanh(q_raw / eps_q) * q_max;
}

struct RewardStats {
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation
};

/// Mean / stddev of the training-time terminal rewards across one problem's
/// trajectory set (correct, incorrect and incomplete all count).
RewardStats tree_reward_stats(std::span<const Trajectory> trajectories);

/// Per-node advantage, constant across the node's tokens.
inline double advantage(double q_node, double q_terminal, double mu,
                        double sigma, AdvantageMode mode, double sigma_floor) {
  if (!(sigma_floor > 0.0)) throw ContractViolation("advantage: sigma_floor must be > 0");
  switch (mode) {
    case AdvantageMode::outcome: return q_terminal - mu;
    case AdvantageMode::node_raw: return q_node;
    case AdvantageMode::node_mean_only: return q_node - mu;
    case AdvantageMode::node_standard: return (q_node - mu) / (sigma + sigma_floor);
  }
  return 0.0;
}

inline double importance_ratio(double new_logprob, double old_logprob) {
  if (!std::isfinite(new_logprob) || !std::isfinite(old_logprob))
    throw NumericalError("importance_ratio: non-finite logprob");
  const double rho = std::exp(new_logprob - old_logprob);
  if (!std::isfinite(rho)) throw NumericalError("importance_ratio: overflow");
  return rho;
}

/// PPO-style pessimistic surrogate with asymmetric clipping bounds.
inline double clipped_surrogate(double rho, double adv, double eps_low,
                                double eps_high) {
  if (!(rho > 0.0)) throw ContractViolation("clipped_surrogate: rho must be > 0");
  const double clamped = std::clamp(rho, 1.0 - eps_low, 1.0 + eps_high);
  return std::min(rho * adv, clamped * adv);
}

/// Reduces the training reward of over-budget responses by `penalty`,
/// floored at -1. Returns the adjusted copy.
Trajectory apply_overlong_penalty(Trajectory trajectory, int max_tokens,
                                  double penalty);

struct LossReport {
  double objective = 0.0;
  long token_count = 0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;  // clipped tokens / tokens
  double mean_advantage = 0.0;
  std::vector<double> trajectory_mean_advantage;
};

struct ObjectiveResult {
  double objective = 0.0;
  Eigen::MatrixXd gradient;  // same shape as the policy weights
  LossReport report;
};

/**
 * Clipped importance-ratio objective over tree-structured trajectories,
 * grouped by problem for reward normalization. Node-level q-values drive
 * the advantages in the configured mode; cached and direct-rollout
 * trajectories (no tree q) always fall back to outcome advantages. Returns
 * the exact analytic gradient of the reported estimator. No KL term.
 */
ObjectiveResult tree_grpo_objective(std::span<const Trajectory> trajectories,
                                    const LinearPolicy& policy,
                                    const LinearPolicy& old_policy,
                                    const TrainParams& params);

/// One gradient-ascent step; returns fresh parameters with version + 1.
LinearPolicy optimizer_step(const LinearPolicy& policy,
                            const Eigen::MatrixXd& gradient,
                            double learning_rate);

}  // namespace treerl
