#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "treerl/environment.hpp"
#include "treerl/trajectory.hpp"
#include "treerl/vocab.hpp"

namespace treerl {

enum class NodeStatus : std::uint8_t {
  internal,
  terminal_correct,
  terminal_incorrect,
  terminal_incomplete,
};

inline bool is_terminal(NodeStatus s) { return s != NodeStatus::internal; }

/// One reasoning step in the search tree. Depth 0 is the root (no step).
struct Node {
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  std::vector<Token> step_tokens;
  std::vector<double> token_logprobs;
  double step_entropy = 0.0;
  double q_value = 0.0;
  int visit_count = 0;
  int depth = 0;
  NodeStatus status = NodeStatus::internal;
};

enum class DepthBonusKind { sqrt, linear, log, none };
enum class SelectionMode { global_frontier, vanilla_uct };
enum class BackupRule { constrained, vanilla };

struct SearchParams {
  int max_depth = 64;          // d_T
  int expansion_width = 8;     // candidates generated per expansion level
  int max_rollouts = 64;       // rollout-iteration budget per tree
  double uct_lambda = 2.0;
  double lambda1 = 0.4;        // quality potential weight
  double lambda2 = 0.0;        // uncertainty bonus weight
  double lambda3 = 0.01;       // depth bonus weight
  DepthBonusKind depth_bonus_kind = DepthBonusKind::sqrt;
  double gamma_min = 0.1;
  SelectionMode selection_mode = SelectionMode::global_frontier;
  BackupRule backup_rule = BackupRule::constrained;
  std::optional<int> early_stop_correct;
  int max_step_tokens = 16;
  int max_nodes = 100000;
  // Newest backed-up negatives extracted alongside a success; 0 keeps all.
  // Caps the negative:correct imbalance of training groups.
  int max_extracted_negatives = 4;

  void validate() const;
};

/**
 * Arena-backed search tree for one problem. Node 0 is always the root;
 * children always have larger indices than their parent. The frontier
 * (childless, non-terminal, below max depth) is cached and invalidated on
 * structural mutation.
 *
 * Single-writer: all mutation of one tree happens on one logical thread.
 * Distinct trees are fully independent.
 */
struct SearchTree {
  Problem problem;
  SearchParams params;
  Token answer_marker = -1;
  std::vector<Node> nodes;
  std::vector<NodeId> terminal_ids;
  int rollout_count = 0;  // completed backups (the update index m)
  int iterations = 0;     // expansion iterations run (the loop index k)
  std::optional<int> first_correct_iteration;

  mutable std::vector<NodeId> frontier_cache;
  mutable bool frontier_fresh = false;

  const Node& node(NodeId id) const { return nodes[id]; }
  Node& node(NodeId id) { return nodes[id]; }
  NodeId size() const { return static_cast<NodeId>(nodes.size()); }
  void invalidate_frontier() const { frontier_fresh = false; }
};

SearchTree make_tree(const Problem& problem, const SearchParams& params,
                     Token answer_marker);

/// Tokens of the full root-to-`id` path, concatenated in step order.
std::vector<Token> path_tokens(const SearchTree& tree, NodeId id);

/// Node ids from root child down to `id` (root itself excluded).
std::vector<NodeId> path_ids(const SearchTree& tree, NodeId id);

}  // namespace treerl
