#pragma once

#include <cmath>
#include <span>
#include <utility>

#include "treerl/policy.hpp"
#include "treerl/rollout.hpp"
#include "treerl/tree.hpp"

namespace treerl {

/// UCT local-selection score: mean reward plus visit-count exploration term.
/// Callers must give unvisited children infinite priority themselves; this
/// function refuses visits == 0 because the formula is undefined there.
inline double uct_score(double q_sum, int visits, int parent_visits,
                        double uct_lambda) {
  if (visits < 1) throw ContractViolation("uct_score: unvisited node");
  if (parent_visits < 1) throw ContractViolation("uct_score: unvisited parent");
  return q_sum / visits +
         uct_lambda * std::sqrt(std::log(static_cast<double>(parent_visits)) /
                                static_cast<double>(visits));
}

/// Depth term of the frontier priority. Domain: 1 <= d <= max_depth.
inline double depth_bonus(int d, int max_depth, DepthBonusKind kind) {
  if (d < 1 || d > max_depth) throw ContractViolation("depth_bonus: depth out of range");
  switch (kind) {
    case DepthBonusKind::sqrt:
      return std::sqrt(static_cast<double>(d) / static_cast<double>(max_depth));
    case DepthBonusKind::linear: return static_cast<double>(d);
    case DepthBonusKind::log: return std::log(static_cast<double>(d) + 1.0);
    case DepthBonusKind::none: return 0.0;
  }
  return 0.0;
}

/// Backup weight: nodes closer to the terminal get more credit, floored so
/// early steps never vanish entirely. Domain: 1 <= i <= l.
inline double temporal_decay(int i, int l, double gamma_min) {
  if (i < 1 || i > l) throw ContractViolation("temporal_decay: index out of range");
  return std::max(static_cast<double>(i) / static_cast<double>(l), gamma_min);
}

/// Terminal reward: +1 for verified-correct, -1 otherwise (incomplete paths
/// are penalized like incorrect ones).
inline double terminal_reward(NodeStatus status) {
  if (!is_terminal(status)) throw ContractViolation("terminal_reward: internal node");
  return status == NodeStatus::terminal_correct ? 1.0 : -1.0;
}

/// {s | childless, not terminal, depth < max_depth}, ascending by id.
/// Cached on the tree until the next structural mutation.
const std::vector<NodeId>& compute_frontier(const SearchTree& tree);

/// Priority of a frontier node: quality potential of its parent, optional
/// entropy bonus, and a depth bonus. Root scores with a neutral parent.
double frontier_priority(const SearchTree& tree, NodeId id);

/// Next node to expand under the configured selection mode, or nothing when
/// the frontier is empty. Ties break toward the lowest id.
std::optional<NodeId> select_expansion_node(const SearchTree& tree);

/// Expands `start` level by level: samples expansion_width candidate steps,
/// attaches them all, classifies terminals (verifying answer-marker steps),
/// and descends into the best non-terminal child until the whole level is
/// terminal. Returns all newly created terminal ids.
std::vector<NodeId> expand_to_terminal(SearchTree& tree, NodeId start,
                                       const StepSampler& policy,
                                       const Verifier& verifier, Rng& rng);

/// Splits terminal nodes by the verifier (incomplete ones verify 0) and
/// refreshes their correct/incorrect statuses.
std::pair<std::vector<NodeId>, std::vector<NodeId>> partition_terminals(
    SearchTree& tree, std::span<const NodeId> new_terminals,
    const Verifier& verifier);

/// Mean step entropy along the root-to-terminal path (root excluded).
double trajectory_entropy(const SearchTree& tree, NodeId terminal);

/// The incorrect terminal with the lowest trajectory entropy: the most
/// confident wrong path, the one that benefits most from supervision.
NodeId select_confident_negative(const SearchTree& tree,
                                 std::span<const NodeId> incorrect);

/// Applies the configured q-update rule along the terminal's path, bumps
/// visit counts (root included), and advances the backup counter.
void backup(SearchTree& tree, NodeId terminal);

/// Soft-clip constants used when trajectories are extracted from a tree.
struct QClip {
  double eps_q = 1.0;
  double q_max = 1.0;
};

struct SearchResult {
  SearchTree tree;
  std::vector<Trajectory> trajectories;
};

/**
 * Full per-problem search: expand (root first, then by selection mode),
 * partition, and back up every correct terminal of the iteration or the
 * single most confident negative. Stops on an empty frontier, the rollout
 * budget, or the early-stop-correct threshold.
 *
 * When at least one correct terminal was found, the extracted trajectory
 * set holds every correct terminal's path plus every backed-up negative
 * path (degenerate negatives filtered out). A search that never succeeds
 * extracts nothing: its evidence lives in the tree's q-values only.
 */
SearchResult run_search(const Problem& problem, const StepSampler& policy,
                        const Verifier& verifier, const SearchParams& params,
                        Token answer_marker, Rng& rng, const QClip& qclip = {},
                        const DegenerateFilterParams& filter = {});

}  // namespace treerl
