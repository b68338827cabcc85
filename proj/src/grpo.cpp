#include "treerl/grpo.hpp"

#include <map>
#include <string>

namespace treerl {

void TrainParams::validate() const {
  std::string problems;
  auto bad = [&](const std::string& msg) {
    problems += problems.empty() ? msg : "; " + msg;
  };
  if (!(eps_q > 0.0)) bad("train.eps_q must be > 0");
  if (!(q_max > 0.0)) bad("train.q_max must be > 0");
  if (!(eps_low > 0.0 && eps_low < 1.0)) bad("train.eps_low must be in (0,1)");
  if (!(eps_high > 0.0 && eps_high < 1.0)) bad("train.eps_high must be in (0,1)");
  if (!(sigma_floor > 0.0)) bad("train.sigma_floor must be > 0");
  if (!(learning_rate > 0.0)) bad("train.learning_rate must be > 0");
  if (max_trajectory_tokens < 1) bad("train.max_trajectory_tokens must be >= 1");
  if (overlong_penalty < 0.0) bad("train.overlong_penalty must be >= 0");
  if (!problems.empty()) throw ConfigError(problems);
}

RewardStats tree_reward_stats(std::span<const Trajectory> trajectories) {
  if (trajectories.empty())
    throw ContractViolation("tree_reward_stats: empty trajectory set");
  const double n = static_cast<double>(trajectories.size());
  double mean = 0.0;
  for (const Trajectory& t : trajectories) mean += t.terminal_reward;
  mean /= n;
  double var = 0.0;
  for (const Trajectory& t : trajectories) {
    const double d = t.terminal_reward - mean;
    var += d * d;
  }
  return {mean, std::sqrt(var / n)};
}

Trajectory apply_overlong_penalty(Trajectory trajectory, int max_tokens,
                                  double penalty) {
  if (trajectory.token_count() > max_tokens) {
    trajectory.terminal_reward =
        std::max(trajectory.terminal_reward - penalty, -1.0);
  }
  return trajectory;
}

ObjectiveResult tree_grpo_objective(std::span<const Trajectory> trajectories,
                                    const LinearPolicy& policy,
                                    const LinearPolicy& old_policy,
                                    const TrainParams& params) {
  params.validate();
  ObjectiveResult result;
  result.gradient = Eigen::MatrixXd::Zero(policy.params().weights.rows(),
                                          policy.params().weights.cols());
  if (trajectories.empty()) return result;

  // Reward normalization is per problem: group trajectories by problem id in
  // first-appearance order and compute each group's terminal-reward stats.
  std::vector<RewardStats> group_stats;
  std::vector<std::size_t> group_index(trajectories.size());
  {
    std::map<std::string, std::size_t> group_of;
    std::vector<std::vector<Trajectory>> grouped;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      const auto [it, fresh] =
          group_of.try_emplace(trajectories[i].problem.id, grouped.size());
      if (fresh) grouped.emplace_back();
      grouped[it->second].push_back(trajectories[i]);
      group_index[i] = it->second;
    }
    group_stats.reserve(grouped.size());
    for (const auto& members : grouped)
      group_stats.push_back(tree_reward_stats(members));
  }

  long total_tokens = 0;
  for (const Trajectory& t : trajectories) total_tokens += t.token_count();
  if (total_tokens == 0) return result;

  const double n_traj = static_cast<double>(trajectories.size());
  double objective = 0.0;
  double ratio_sum = 0.0;
  double advantage_sum = 0.0;
  long clipped = 0;

  Eigen::VectorXd probs;
  Eigen::VectorXd features;
  for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
    const Trajectory& traj = trajectories[ti];
    if (traj.step_count() == 0) continue;
    if (traj.per_node_q.size() != traj.step_sizes.size())
      throw ContractViolation("tree_grpo_objective: per_node_q/step_sizes mismatch in " +
                              traj.problem.id);
    const RewardStats& stats = group_stats[group_index[ti]];
    // Flat trajectories carry no usable tree q-values; they always train on
    // the outcome reward.
    const AdvantageMode mode = traj.source == TrajSource::mcts
                                   ? params.advantage_mode
                                   : AdvantageMode::outcome;

    Context ctx;
    ctx.problem = &traj.problem;
    const std::vector<double> old_logprobs =
        old_policy.logprob_tokens(ctx, traj.tokens);

    double traj_advantage_sum = 0.0;
    EnvState state = initial_state(traj.problem);
    std::size_t pos = 0;
    const int steps = traj.step_count();
    for (int j = 0; j < steps; ++j) {
      const double q_node =
          j + 1 == steps ? traj.terminal_reward : traj.per_node_q[static_cast<std::size_t>(j)];
      const double adv = advantage(q_node, traj.terminal_reward, stats.mu,
                                   stats.sigma, mode, params.sigma_floor);
      const int step_size = traj.step_sizes[static_cast<std::size_t>(j)];
      const double weight =
          params.loss_aggregation == LossAggregation::node_mean
              ? 1.0 / (n_traj * static_cast<double>(steps) * static_cast<double>(step_size))
              : 1.0 / static_cast<double>(total_tokens);
      for (int k = 0; k < step_size; ++k, ++pos) {
        const Token token = traj.tokens[pos];
        const Eigen::VectorXd logp =
            policy.token_logprobs(state, traj.problem, &probs, &features);
        const double rho = importance_ratio(logp[token], old_logprobs[pos]);
        const double clamped =
            std::clamp(rho, 1.0 - params.eps_low, 1.0 + params.eps_high);
        const double unclipped = rho * adv;
        const double surrogate = std::min(unclipped, clamped * adv);
        objective += weight * surrogate;
        ratio_sum += rho;
        advantage_sum += adv;
        traj_advantage_sum += adv;
        if (clamped * adv < unclipped) ++clipped;
        // Gradient flows only while the unclipped branch is active (ties
        // included: both branches coincide inside the clip interval).
        if (unclipped <= clamped * adv) {
          Eigen::VectorXd delta = -probs;
          delta[token] += 1.0;
          result.gradient.noalias() +=
              (weight * unclipped / policy.temperature()) * features * delta.transpose();
        }
        advance(state, policy.vocab(), token);
      }
    }
    if (!std::isfinite(objective))
      throw NumericalError("tree_grpo_objective: non-finite objective at trajectory for " +
                           traj.problem.id);
    result.report.trajectory_mean_advantage.push_back(
        traj_advantage_sum / static_cast<double>(traj.token_count()));
  }

  result.objective = objective;
  result.report.objective = objective;
  result.report.token_count = total_tokens;
  result.report.mean_ratio = ratio_sum / static_cast<double>(total_tokens);
  result.report.clip_fraction =
      static_cast<double>(clipped) / static_cast<double>(total_tokens);
  result.report.mean_advantage = advantage_sum / static_cast<double>(total_tokens);
  return result;
}

LinearPolicy optimizer_step(const LinearPolicy& policy,
                            const Eigen::MatrixXd& gradient,
                            double learning_rate) {
  if (gradient.rows() != policy.params().weights.rows() ||
      gradient.cols() != policy.params().weights.cols())
    throw ContractViolation("optimizer_step: gradient shape mismatch");
  LinearPolicy next = policy;
  next.params().weights += learning_rate * gradient;
  next.params().version += 1;
  if (!next.params().weights.allFinite())
    throw NumericalError("optimizer_step: non-finite parameter update");
  return next;
}

}  // namespace treerl
