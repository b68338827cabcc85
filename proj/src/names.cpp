#include "treerl/names.hpp"

namespace treerl {

std::string to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::internal: return "internal";
    case NodeStatus::terminal_correct: return "terminal_correct";
    case NodeStatus::terminal_incorrect: return "terminal_incorrect";
    case NodeStatus::terminal_incomplete: return "terminal_incomplete";
  }
  return "?";
}

NodeStatus node_status_from(const std::string& s) {
  if (s == "internal") return NodeStatus::internal;
  if (s == "terminal_correct") return NodeStatus::terminal_correct;
  if (s == "terminal_incorrect") return NodeStatus::terminal_incorrect;
  if (s == "terminal_incomplete") return NodeStatus::terminal_incomplete;
  throw ConfigError("unknown node status: " + s);
}

std::string to_string(DepthBonusKind k) {
  switch (k) {
    case DepthBonusKind::sqrt: return "sqrt";
    case DepthBonusKind::linear: return "linear";
    case DepthBonusKind::log: return "log";
    case DepthBonusKind::none: return "none";
  }
  return "?";
}

DepthBonusKind depth_bonus_from(const std::string& s) {
  if (s == "sqrt") return DepthBonusKind::sqrt;
  if (s == "linear") return DepthBonusKind::linear;
  if (s == "log") return DepthBonusKind::log;
  if (s == "none") return DepthBonusKind::none;
  throw ConfigError("unknown depth bonus kind: " + s);
}

std::string to_string(SelectionMode m) {
  return m == SelectionMode::global_frontier ? "global_frontier" : "vanilla_uct";
}

SelectionMode selection_mode_from(const std::string& s) {
  if (s == "global_frontier") return SelectionMode::global_frontier;
  if (s == "vanilla_uct") return SelectionMode::vanilla_uct;
  throw ConfigError("unknown selection mode: " + s);
}

std::string to_string(BackupRule r) {
  return r == BackupRule::constrained ? "constrained" : "vanilla";
}

BackupRule backup_rule_from(const std::string& s) {
  if (s == "constrained") return BackupRule::constrained;
  if (s == "vanilla") return BackupRule::vanilla;
  throw ConfigError("unknown backup rule: " + s);
}

std::string to_string(AdvantageMode m) {
  switch (m) {
    case AdvantageMode::outcome: return "outcome";
    case AdvantageMode::node_raw: return "node_raw";
    case AdvantageMode::node_standard: return "node_standard";
    case AdvantageMode::node_mean_only: return "node_mean_only";
  }
  return "?";
}

AdvantageMode advantage_mode_from(const std::string& s) {
  if (s == "outcome") return AdvantageMode::outcome;
  if (s == "node_raw") return AdvantageMode::node_raw;
  if (s == "node_standard") return AdvantageMode::node_standard;
  if (s == "node_mean_only") return AdvantageMode::node_mean_only;
  throw ConfigError("unknown advantage mode: " + s);
}

std::string to_string(LossAggregation a) {
  return a == LossAggregation::node_mean ? "node_mean" : "token_mean";
}

LossAggregation loss_aggregation_from(const std::string& s) {
  if (s == "node_mean") return LossAggregation::node_mean;
  if (s == "token_mean") return LossAggregation::token_mean;
  throw ConfigError("unknown loss aggregation: " + s);
}

std::string to_string(TrajLabel l) {
  switch (l) {
    case TrajLabel::correct: return "correct";
    case TrajLabel::incorrect: return "incorrect";
    case TrajLabel::incomplete: return "incomplete";
  }
  return "?";
}

TrajLabel traj_label_from(const std::string& s) {
  if (s == "correct") return TrajLabel::correct;
  if (s == "incorrect") return TrajLabel::incorrect;
  if (s == "incomplete") return TrajLabel::incomplete;
  throw ConfigError("unknown trajectory label: " + s);
}

std::string to_string(TrajSource s) {
  switch (s) {
    case TrajSource::mcts: return "mcts";
    case TrajSource::cached: return "cached";
    case TrajSource::direct_rollout: return "direct_rollout";
  }
  return "?";
}

TrajSource traj_source_from(const std::string& s) {
  if (s == "mcts") return TrajSource::mcts;
  if (s == "cached") return TrajSource::cached;
  if (s == "direct_rollout") return TrajSource::direct_rollout;
  throw ConfigError("unknown trajectory source: " + s);
}

}  // namespace treerl
