#pragma once

// Shared fixtures: scripted step policies, hand-built problems, and the
// independent oracles the tests check the implementation against.

#include <algorithm>
#include <cmath>
#include <vector>

#include "treerl/environment.hpp"
#include "treerl/policy.hpp"
#include "treerl/rollout.hpp"
#include "treerl/search.hpp"

namespace treerl::testing {

inline Problem make_problem(std::int64_t start, std::int64_t target,
                            int difficulty = 1, const std::string& id = "t0") {
  Problem p;
  p.id = id;
  p.start_value = start;
  p.target_value = target;
  p.difficulty = difficulty;
  p.op_budget = difficulty + 2;
  return p;
}

/// Replays the context, then emits the next step of a shortest solution:
/// one op per step, the answer once the target is reached. Deterministic,
/// probability-1 steps (logprob 0, entropy 0).
class OracleSampler : public StepSampler {
 public:
  explicit OracleSampler(VocabularySpec vocab) : vocab_(std::move(vocab)) {}

  StepSample sample_step(const Context& ctx, int max_step_tokens,
                         Rng& /*rng*/) const override {
    EnvState state = initial_state(*ctx.problem);
    for (Token t : ctx.prefix) advance(state, vocab_, t);
    StepSample sample;
    if (state.in_answer || state.malformed || state.overflowed) {
      sample.tokens.push_back(vocab_.sep_id());  // nothing sensible left
    } else if (state.value == ctx.problem->target_value) {
      sample.tokens.push_back(vocab_.ans_id());
      for (char c : std::to_string(state.value)) {
        sample.tokens.push_back(c == '-' ? vocab_.minus_id()
                                         : vocab_.digit_id(c - '0'));
      }
    } else {
      Problem rest = *ctx.problem;
      rest.start_value = state.value;
      const auto ops = solve_min_ops(vocab_, rest, 16);
      if (ops && !ops->empty()) {
        sample.tokens.push_back(ops->front());
        sample.tokens.push_back(vocab_.sep_id());
      } else {
        sample.tokens.push_back(vocab_.sep_id());
      }
    }
    if (static_cast<int>(sample.tokens.size()) > max_step_tokens)
      sample.tokens.resize(static_cast<std::size_t>(max_step_tokens));
    sample.logprobs.assign(sample.tokens.size(), 0.0);
    sample.entropy_estimate = 0.0;
    return sample;
  }

 private:
  VocabularySpec vocab_;
};

/// Immediately declares a wrong answer; every trajectory verifies 0.
class WrongAnswerSampler : public StepSampler {
 public:
  explicit WrongAnswerSampler(VocabularySpec vocab) : vocab_(std::move(vocab)) {}

  StepSample sample_step(const Context& ctx, int /*max_step_tokens*/,
                         Rng& /*rng*/) const override {
    StepSample sample;
    sample.tokens.push_back(vocab_.ans_id());
    // Declare target + 1: parses fine, never matches the running value.
    for (char c : std::to_string(ctx.problem->target_value + 1)) {
      sample.tokens.push_back(c == '-' ? vocab_.minus_id()
                                       : vocab_.digit_id(c - '0'));
    }
    sample.logprobs.assign(sample.tokens.size(), 0.0);
    sample.entropy_estimate = 0.0;
    return sample;
  }

 private:
  VocabularySpec vocab_;
};

/// Emits the problem's correct answer as the very first step.
class ImmediateAnswerSampler : public StepSampler {
 public:
  explicit ImmediateAnswerSampler(VocabularySpec vocab) : vocab_(std::move(vocab)) {}

  StepSample sample_step(const Context& ctx, int /*max_step_tokens*/,
                         Rng& /*rng*/) const override {
    EnvState state = initial_state(*ctx.problem);
    for (Token t : ctx.prefix) advance(state, vocab_, t);
    StepSample sample;
    sample.tokens.push_back(vocab_.ans_id());
    for (char c : std::to_string(state.value)) {
      sample.tokens.push_back(c == '-' ? vocab_.minus_id()
                                       : vocab_.digit_id(c - '0'));
    }
    sample.logprobs.assign(sample.tokens.size(), 0.0);
    sample.entropy_estimate = 0.0;
    return sample;
  }

 private:
  VocabularySpec vocab_;
};

/// Never answers: emits a single no-op step forever (forces incomplete
/// terminals at the depth limit).
class NeverAnswerSampler : public StepSampler {
 public:
  explicit NeverAnswerSampler(VocabularySpec vocab) : vocab_(std::move(vocab)) {}

  StepSample sample_step(const Context& /*ctx*/, int /*max_step_tokens*/,
                         Rng& /*rng*/) const override {
    StepSample sample;
    sample.tokens = {vocab_.sep_id()};
    sample.logprobs = {0.0};
    sample.entropy_estimate = 0.0;
    return sample;
  }

 private:
  VocabularySpec vocab_;
};

/// Frozen "mid-training" policy for tests: the library's base-policy
/// initializer at a chosen strength.
inline LinearPolicy blended_policy(const VocabularySpec& vocab, double scale) {
  return heuristic_policy(vocab, scale);
}

/// Verified-correct trajectory for a problem, built from an independently
/// solved op sequence; one op per step, the answer as the final step.
inline Trajectory solution_trajectory(const VocabularySpec& vocab, const Problem& p) {
  const auto ops = solve_min_ops(vocab, p, 16);
  if (!ops) throw std::logic_error("solution_trajectory: unsolvable fixture");
  Trajectory t;
  t.problem = p;
  t.label = TrajLabel::correct;
  t.source = TrajSource::mcts;
  t.terminal_reward = 1.0;
  for (Token op : *ops) {
    t.tokens.push_back(op);
    t.tokens.push_back(vocab.sep_id());
    t.step_sizes.push_back(2);
    t.per_node_q.push_back(0.5);
  }
  const std::size_t before = t.tokens.size();
  t.tokens.push_back(vocab.ans_id());
  for (char c : std::to_string(p.target_value))
    t.tokens.push_back(c == '-' ? vocab.minus_id() : vocab.digit_id(c - '0'));
  t.step_sizes.push_back(static_cast<int>(t.tokens.size() - before));
  t.per_node_q.push_back(1.0);
  return t;
}

/// Brute-force frontier: the definition, recomputed from scratch.
inline std::vector<NodeId> brute_force_frontier(const SearchTree& tree) {
  std::vector<NodeId> out;
  for (NodeId id = 0; id < tree.size(); ++id) {
    const Node& n = tree.node(id);
    if (n.children.empty() && !is_terminal(n.status) &&
        n.depth < tree.params.max_depth)
      out.push_back(id);
  }
  return out;
}

/// Manual node insertion for hand-built trees.
inline NodeId add_node(SearchTree& tree, NodeId parent,
                       NodeStatus status = NodeStatus::internal,
                       double entropy = 0.0, std::vector<Token> tokens = {}) {
  Node n;
  n.parent = parent;
  n.depth = tree.node(parent).depth + 1;
  n.status = status;
  n.step_entropy = entropy;
  n.step_tokens = std::move(tokens);
  const NodeId id = tree.size();
  tree.nodes.push_back(std::move(n));
  tree.node(parent).children.push_back(id);
  if (is_terminal(status)) tree.terminal_ids.push_back(id);
  tree.invalidate_frontier();
  return id;
}

/// Random structurally-valid tree: nodes at max depth are terminal,
/// terminals are childless, incomplete only at max depth.
inline SearchTree random_tree(Rng& rng, SearchParams params, int node_budget) {
  params.early_stop_correct.reset();
  const Problem problem = make_problem(1, 2, 1, "rnd");
  SearchTree tree = make_tree(problem, params, -1);
  std::vector<NodeId> growable{0};
  while (static_cast<int>(tree.size()) < node_budget && !growable.empty()) {
    const std::size_t pick =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(growable.size()) - 1));
    const NodeId parent = growable[pick];
    const int child_depth = tree.node(parent).depth + 1;
    NodeStatus status = NodeStatus::internal;
    const double dice = rng.uniform();
    if (child_depth >= params.max_depth) {
      status = dice < 0.3   ? NodeStatus::terminal_correct
               : dice < 0.7 ? NodeStatus::terminal_incorrect
                            : NodeStatus::terminal_incomplete;
    } else if (dice < 0.25) {
      status = dice < 0.1 ? NodeStatus::terminal_correct
                          : NodeStatus::terminal_incorrect;
    }
    const NodeId id = add_node(tree, parent, status, rng.uniform());
    if (!is_terminal(status) && child_depth < params.max_depth)
      growable.push_back(id);
    // Parents may receive several children; drop them occasionally so the
    // tree gets both wide and deep spots.
    if (rng.uniform() < 0.4) growable.erase(growable.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return tree;
}

}  // namespace treerl::testing
