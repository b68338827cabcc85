#include "treerl/rollout.hpp"

namespace treerl {

Verifier exact_verifier(const VocabularySpec& vocab) {
  return [vocab](const Problem& problem, std::span<const Token> tokens) {
    return verify(vocab, problem, tokens);
  };
}

std::vector<Trajectory> direct_rollouts(const VocabularySpec& vocab,
                                        const Problem& problem,
                                        const StepSampler& policy,
                                        const Verifier& verifier, int count,
                                        Rng& rng, int max_steps,
                                        int max_step_tokens) {
  if (count < 0) throw ContractViolation("direct_rollouts: count < 0");
  const Token marker = vocab.ans_id();
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Context ctx;
    ctx.problem = &problem;
    Trajectory traj;
    traj.problem = problem;
    traj.source = TrajSource::direct_rollout;
    bool answered = false;
    for (int step = 0; step < max_steps && !answered; ++step) {
      const StepSample sample = policy.sample_step(ctx, max_step_tokens, rng);
      traj.tokens.insert(traj.tokens.end(), sample.tokens.begin(), sample.tokens.end());
      traj.step_sizes.push_back(static_cast<int>(sample.tokens.size()));
      ctx.prefix.insert(ctx.prefix.end(), sample.tokens.begin(), sample.tokens.end());
      for (Token t : sample.tokens) answered = answered || t == marker;
    }
    const bool correct = answered && verifier(problem, traj.tokens) == 1;
    traj.label = !answered ? TrajLabel::incomplete
                 : correct ? TrajLabel::correct
                           : TrajLabel::incorrect;
    traj.terminal_reward = label_reward(traj.label);
    traj.per_node_q.assign(traj.step_sizes.size(), traj.terminal_reward);
    out.push_back(std::move(traj));
  }
  return out;
}

double pass1_at_k(const VocabularySpec& vocab, const Problem& problem,
                  const StepSampler& policy, const Verifier& verifier, int k,
                  Rng& rng, int max_steps, int max_step_tokens) {
  if (k < 1) throw ContractViolation("pass1_at_k: k < 1");
  const auto rollouts = direct_rollouts(vocab, problem, policy, verifier, k,
                                        rng, max_steps, max_step_tokens);
  int hits = 0;
  for (const Trajectory& t : rollouts) hits += t.label == TrajLabel::correct ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

}  // namespace treerl
