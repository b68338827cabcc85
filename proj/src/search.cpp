#include "treerl/search.hpp"

#include <algorithm>
#include <cmath>

#include "treerl/grpo.hpp"

namespace treerl {

void SearchParams::validate() const {
  std::string problems;
  auto bad = [&](const std::string& msg) {
    problems += problems.empty() ? msg : "; " + msg;
  };
  if (max_depth < 1) bad("search.max_depth must be >= 1");
  if (expansion_width < 1) bad("search.expansion_width must be >= 1");
  if (max_rollouts < 1) bad("search.max_rollouts must be >= 1");
  if (!(uct_lambda > 0.0)) bad("search.uct_lambda must be > 0");
  if (!(gamma_min > 0.0 && gamma_min <= 1.0)) bad("search.gamma_min must be in (0, 1]");
  if (max_step_tokens < 1) bad("search.max_step_tokens must be >= 1");
  if (max_nodes < 2) bad("search.max_nodes must be >= 2");
  if (early_stop_correct && *early_stop_correct < 1)
    bad("search.early_stop_correct must be >= 1 when set");
  if (max_extracted_negatives < 0)
    bad("search.max_extracted_negatives must be >= 0");
  if (!problems.empty()) throw ConfigError(problems);
}

SearchTree make_tree(const Problem& problem, const SearchParams& params,
                     Token answer_marker) {
  params.validate();
  SearchTree tree;
  tree.problem = problem;
  tree.params = params;
  tree.answer_marker = answer_marker;
  tree.nodes.emplace_back();  // root: depth 0, no step
  return tree;
}

std::vector<NodeId> path_ids(const SearchTree& tree, NodeId id) {
  std::vector<NodeId> rev;
  NodeId cur = id;
  for (;;) {
    const Node& n = tree.node(cur);
    if (!n.parent) {
      if (cur != 0) throw IntegrityError("path does not reach the root");
      break;
    }
    rev.push_back(cur);
    const NodeId p = *n.parent;
    if (p >= tree.size() || tree.node(p).depth + 1 != n.depth)
      throw IntegrityError("broken parent chain at node " + std::to_string(cur));
    cur = p;
  }
  std::reverse(rev.begin(), rev.end());
  return rev;
}

std::vector<Token> path_tokens(const SearchTree& tree, NodeId id) {
  std::vector<Token> tokens;
  for (NodeId n : path_ids(tree, id)) {
    const auto& step = tree.node(n).step_tokens;
    tokens.insert(tokens.end(), step.begin(), step.end());
  }
  return tokens;
}

namespace {

bool in_frontier(const SearchTree& tree, const Node& n) {
  return n.children.empty() && !is_terminal(n.status) &&
         n.depth < tree.params.max_depth;
}

}  // namespace

const std::vector<NodeId>& compute_frontier(const SearchTree& tree) {
  if (tree.size() == 0) throw ContractViolation("compute_frontier: empty tree");
  if (!tree.frontier_fresh) {
    tree.frontier_cache.clear();
    for (NodeId id = 0; id < tree.size(); ++id) {
      if (in_frontier(tree, tree.node(id))) tree.frontier_cache.push_back(id);
    }
    tree.frontier_fresh = true;
  }
  return tree.frontier_cache;
}

double frontier_priority(const SearchTree& tree, NodeId id) {
  if (id >= tree.size()) throw ContractViolation("frontier_priority: bad node id");
  const Node& n = tree.node(id);
  if (!in_frontier(tree, n))
    throw ContractViolation("frontier_priority: node is not a frontier node");

  double q_parent = 0.0;  // neutral for the root and for unvisited parents
  if (n.parent) {
    const Node& p = tree.node(*n.parent);
    if (p.visit_count > 0)
      q_parent = p.q_value / static_cast<double>(p.visit_count);
  }
  const double depth_term =
      n.depth >= 1
          ? depth_bonus(n.depth, tree.params.max_depth, tree.params.depth_bonus_kind)
          : 0.0;
  return tree.params.lambda1 * std::tanh(q_parent) +
         tree.params.lambda2 * n.step_entropy + tree.params.lambda3 * depth_term;
}

namespace {

// Nodes whose subtree still contains a frontier node; the only branches a
// root-to-leaf descent may take.
std::vector<char> expandable_mask(const SearchTree& tree) {
  std::vector<char> mask(tree.size(), 0);
  for (NodeId id = tree.size(); id-- > 0;) {  // children precede parents here
    const Node& n = tree.node(id);
    char flag = in_frontier(tree, n) ? 1 : 0;
    for (NodeId c : n.children) flag |= mask[c];
    mask[id] = flag;
  }
  return mask;
}

NodeId descend_vanilla_uct(const SearchTree& tree, const std::vector<char>& mask) {
  NodeId cur = 0;
  while (!tree.node(cur).children.empty()) {
    const Node& parent = tree.node(cur);
    NodeId chosen = cur;
    bool have = false;
    bool chosen_unvisited = false;
    double best = 0.0;
    for (NodeId c : parent.children) {
      if (!mask[c]) continue;
      const Node& child = tree.node(c);
      if (child.visit_count == 0) {
        if (!chosen_unvisited) {  // unvisited first; lowest id wins ties
          chosen = c;
          chosen_unvisited = true;
          have = true;
        }
        continue;
      }
      if (chosen_unvisited) continue;
      const double score =
          uct_score(child.q_value, child.visit_count, parent.visit_count,
                    tree.params.uct_lambda);
      if (!have || score > best) {
        best = score;
        chosen = c;
        have = true;
      }
    }
    if (!have) throw IntegrityError("uct descent entered a dead branch");
    cur = chosen;
  }
  return cur;
}

}  // namespace

std::optional<NodeId> select_expansion_node(const SearchTree& tree) {
  const auto& frontier = compute_frontier(tree);
  if (frontier.empty()) return std::nullopt;

  if (tree.params.selection_mode == SelectionMode::vanilla_uct) {
    return descend_vanilla_uct(tree, expandable_mask(tree));
  }

  NodeId best_id = frontier.front();
  double best = frontier_priority(tree, best_id);
  for (std::size_t i = 1; i < frontier.size(); ++i) {
    const double score = frontier_priority(tree, frontier[i]);
    if (score > best) {  // strict: ties keep the lowest id
      best = score;
      best_id = frontier[i];
    }
  }
  return best_id;
}

std::vector<NodeId> expand_to_terminal(SearchTree& tree, NodeId start,
                                       const StepSampler& policy,
                                       const Verifier& verifier, Rng& rng) {
  if (start >= tree.size()) throw ContractViolation("expand_to_terminal: bad node id");
  if (!tree.node(start).children.empty())
    throw ContractViolation("expand_to_terminal: node already has children");
  if (!in_frontier(tree, tree.node(start)))
    throw ContractViolation("expand_to_terminal: node is not expandable");

  Context ctx;
  ctx.problem = &tree.problem;
  ctx.prefix = path_tokens(tree, start);

  std::vector<NodeId> new_terminals;
  NodeId current = start;
  for (;;) {
    if (tree.size() + static_cast<NodeId>(tree.params.expansion_width) >
        static_cast<NodeId>(tree.params.max_nodes))
      throw ResourceError("tree exceeded the node cap of " +
                          std::to_string(tree.params.max_nodes));

    const int child_depth = tree.node(current).depth + 1;
    std::optional<NodeId> descend;
    for (int j = 0; j < tree.params.expansion_width; ++j) {
      StepSample sample = policy.sample_step(ctx, tree.params.max_step_tokens, rng);
      Node child;
      child.parent = current;
      child.depth = child_depth;
      child.step_tokens = std::move(sample.tokens);
      child.token_logprobs = std::move(sample.logprobs);
      child.step_entropy = sample.entropy_estimate;

      const bool answered =
          std::find(child.step_tokens.begin(), child.step_tokens.end(),
                    tree.answer_marker) != child.step_tokens.end();
      if (answered) {
        std::vector<Token> full = ctx.prefix;
        full.insert(full.end(), child.step_tokens.begin(), child.step_tokens.end());
        child.status = verifier(tree.problem, full) == 1
                           ? NodeStatus::terminal_correct
                           : NodeStatus::terminal_incorrect;
      } else if (child_depth >= tree.params.max_depth) {
        child.status = NodeStatus::terminal_incomplete;
      }

      const NodeId id = tree.size();
      tree.nodes.push_back(std::move(child));
      tree.node(current).children.push_back(id);
      if (is_terminal(tree.node(id).status)) {
        tree.terminal_ids.push_back(id);
        new_terminals.push_back(id);
      } else if (!descend) {
        descend = id;  // all candidates are unvisited: lowest id wins
      }
    }
    tree.invalidate_frontier();
    if (!descend) break;  // the whole level is terminal
    current = *descend;
    const auto& step = tree.node(current).step_tokens;
    ctx.prefix.insert(ctx.prefix.end(), step.begin(), step.end());
  }
  return new_terminals;
}

std::pair<std::vector<NodeId>, std::vector<NodeId>> partition_terminals(
    SearchTree& tree, std::span<const NodeId> new_terminals,
    const Verifier& verifier) {
  std::vector<NodeId> correct;
  std::vector<NodeId> incorrect;
  for (NodeId id : new_terminals) {
    if (id >= tree.size()) throw ContractViolation("partition_terminals: bad node id");
    Node& n = tree.node(id);
    if (!is_terminal(n.status))
      throw ContractViolation("partition_terminals: node is not terminal");
    if (n.status == NodeStatus::terminal_incomplete) {
      incorrect.push_back(id);  // incomplete verifies 0 but keeps its status
      continue;
    }
    const int v = verifier(tree.problem, path_tokens(tree, id));
    n.status = v == 1 ? NodeStatus::terminal_correct : NodeStatus::terminal_incorrect;
    (v == 1 ? correct : incorrect).push_back(id);
  }
  return {std::move(correct), std::move(incorrect)};
}

double trajectory_entropy(const SearchTree& tree, NodeId terminal) {
  if (terminal >= tree.size()) throw ContractViolation("trajectory_entropy: bad node id");
  if (!is_terminal(tree.node(terminal).status))
    throw ContractViolation("trajectory_entropy: node is not terminal");
  const auto ids = path_ids(tree, terminal);
  double sum = 0.0;
  for (NodeId id : ids) sum += tree.node(id).step_entropy;
  return sum / static_cast<double>(ids.size());
}

NodeId select_confident_negative(const SearchTree& tree,
                                 std::span<const NodeId> incorrect) {
  if (incorrect.empty())
    throw ContractViolation("select_confident_negative: no incorrect terminals");
  NodeId best_id = incorrect.front();
  double best = trajectory_entropy(tree, best_id);
  for (std::size_t i = 1; i < incorrect.size(); ++i) {
    const double h = trajectory_entropy(tree, incorrect[i]);
    if (h < best || (h == best && incorrect[i] < best_id)) {
      best = h;
      best_id = incorrect[i];
    }
  }
  return best_id;
}

void backup(SearchTree& tree, NodeId terminal) {
  if (terminal >= tree.size() || terminal == 0)
    throw ContractViolation("backup: bad terminal id");
  Node& term = tree.node(terminal);
  if (!is_terminal(term.status))
    throw ContractViolation("backup: node is not terminal");

  const auto ids = path_ids(tree, terminal);  // s_1 .. s_l
  const int l = static_cast<int>(ids.size());
  const double r = terminal_reward(term.status);

  term.q_value = r;
  for (int i = 1; i < l; ++i) {
    Node& n = tree.node(ids[static_cast<std::size_t>(i - 1)]);
    const double gamma = temporal_decay(i, l, tree.params.gamma_min);
    const double q_prev = n.q_value;
    if (tree.params.backup_rule == BackupRule::constrained) {
      if (q_prev * r >= 0.0) {
        n.q_value = q_prev + gamma * r;
      } else if (r > 0.0) {
        n.q_value = gamma * r;  // reset: the node just led to a success
      }  // else q_prev > 0, r < 0: protected, unchanged
    } else {
      n.q_value = q_prev * r >= 0.0 ? q_prev + gamma * r
                                    : std::max(q_prev + gamma * r, 0.0);
    }
  }

  tree.node(0).visit_count += 1;
  for (NodeId id : ids) tree.node(id).visit_count += 1;
  tree.rollout_count += 1;
}

namespace {

Trajectory extract_trajectory(const SearchTree& tree, NodeId terminal,
                              const QClip& qclip) {
  Trajectory traj;
  traj.problem = tree.problem;
  traj.node_path = path_ids(tree, terminal);
  traj.source = TrajSource::mcts;
  const std::size_t l = traj.node_path.size();
  for (std::size_t i = 0; i < l; ++i) {
    const Node& n = tree.node(traj.node_path[i]);
    traj.tokens.insert(traj.tokens.end(), n.step_tokens.begin(), n.step_tokens.end());
    traj.step_sizes.push_back(static_cast<int>(n.step_tokens.size()));
    traj.per_node_q.push_back(i + 1 == l
                                  ? n.q_value  // terminal reward, never clipped
                                  : soft_clip_q(n.q_value, qclip.eps_q, qclip.q_max));
  }
  switch (tree.node(terminal).status) {
    case NodeStatus::terminal_correct: traj.label = TrajLabel::correct; break;
    case NodeStatus::terminal_incomplete: traj.label = TrajLabel::incomplete; break;
    default: traj.label = TrajLabel::incorrect; break;
  }
  traj.terminal_reward = label_reward(traj.label);
  return traj;
}

}  // namespace

SearchResult run_search(const Problem& problem, const StepSampler& policy,
                        const Verifier& verifier, const SearchParams& params,
                        Token answer_marker, Rng& rng, const QClip& qclip,
                        const DegenerateFilterParams& filter) {
  SearchTree tree = make_tree(problem, params, answer_marker);
  std::vector<NodeId> backed_negatives;
  int correct_total = 0;

  for (int k = 1; k <= params.max_rollouts; ++k) {
    NodeId start;
    if (k == 1) {
      start = 0;  // initial expansion from the root
    } else {
      const auto selected = select_expansion_node(tree);
      if (!selected) break;  // frontier exhausted
      start = *selected;
    }
    tree.iterations = k;

    const auto new_terminals = expand_to_terminal(tree, start, policy, verifier, rng);
    const auto [correct, incorrect] = partition_terminals(tree, new_terminals, verifier);

    if (!correct.empty()) {
      for (NodeId id : correct) backup(tree, id);
      if (!tree.first_correct_iteration) tree.first_correct_iteration = k;
      correct_total += static_cast<int>(correct.size());
    } else {
      const NodeId negative = select_confident_negative(tree, incorrect);
      backup(tree, negative);
      backed_negatives.push_back(negative);
    }

    if (params.early_stop_correct && correct_total >= *params.early_stop_correct)
      break;
  }

  // Trajectories feed training only when the search found a solution: a
  // tree with no correct terminal contributes supervision through its
  // q-values on later searches, not through the training set. Negatives
  // extracted alongside a success give the trainer its contrast; only the
  // newest few are kept so one search cannot flood a group with failures.
  std::vector<Trajectory> trajectories;
  if (tree.first_correct_iteration) {
    for (NodeId id : tree.terminal_ids) {
      if (tree.node(id).status == NodeStatus::terminal_correct)
        trajectories.push_back(extract_trajectory(tree, id, qclip));
    }
    std::size_t from = 0;
    if (params.max_extracted_negatives > 0 &&
        backed_negatives.size() > static_cast<std::size_t>(params.max_extracted_negatives))
      from = backed_negatives.size() -
             static_cast<std::size_t>(params.max_extracted_negatives);
    for (std::size_t i = from; i < backed_negatives.size(); ++i) {
      Trajectory traj = extract_trajectory(tree, backed_negatives[i], qclip);
      if (degenerate_filter(traj, filter)) trajectories.push_back(std::move(traj));
    }
  }
  return {std::move(tree), std::move(trajectories)};
}

}  // namespace treerl
