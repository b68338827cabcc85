#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "treerl/environment.hpp"
#include "treerl/vocab.hpp"

namespace treerl {

using NodeId = std::uint32_t;

enum class TrajLabel { correct, incorrect, incomplete };
enum class TrajSource { mcts, cached, direct_rollout };

/**
 * One root-to-terminal solution attempt; the unit of training.
 *
 * Tree-extracted trajectories carry the node ids they came from; cached and
 * direct-rollout trajectories keep node_path empty and rely on step_sizes
 * for their step structure. per_node_q is a snapshot taken at extraction:
 * soft-clipped for intermediate steps, the raw terminal reward for the last.
 */
struct Trajectory {
  Problem problem;                  // the task this run attempted
  std::vector<NodeId> node_path;    // empty for flat sources
  std::vector<Token> tokens;        // all steps concatenated
  std::vector<int> step_sizes;      // tokens per step; aligned with per_node_q
  std::vector<double> per_node_q;
  TrajLabel label = TrajLabel::incorrect;
  TrajSource source = TrajSource::mcts;
  double terminal_reward = -1.0;    // +1/-1 by label, then penalty-adjusted

  int step_count() const { return static_cast<int>(step_sizes.size()); }
  int token_count() const { return static_cast<int>(tokens.size()); }
};

inline double label_reward(TrajLabel label) {
  return label == TrajLabel::correct ? 1.0 : -1.0;
}

struct DegenerateFilterParams {
  int min_block = 1;        // shortest repeating block considered
  int min_repeats = 8;      // consecutive repetitions that trigger a drop
  int max_tokens = 4096;    // trajectory token budget
};

/// Keep/drop decision for training data. Correct trajectories are always
/// kept; incorrect/incomplete ones are dropped when they contain a
/// contiguous block of length >= min_block repeated >= min_repeats times,
/// or exceed the token budget.
bool degenerate_filter(const Trajectory& trajectory,
                       const DegenerateFilterParams& params = {});

}  // namespace treerl
