#pragma once

#include <string>

#include "treerl/common.hpp"
#include "treerl/grpo.hpp"
#include "treerl/tree.hpp"
#include "treerl/trajectory.hpp"

namespace treerl {

// String forms used by every on-disk format. from_* throws ConfigError on
// unknown names so typos surface at parse time.

std::string to_string(NodeStatus s);
NodeStatus node_status_from(const std::string& s);

std::string to_string(DepthBonusKind k);
DepthBonusKind depth_bonus_from(const std::string& s);

std::string to_string(SelectionMode m);
SelectionMode selection_mode_from(const std::string& s);

std::string to_string(BackupRule r);
BackupRule backup_rule_from(const std::string& s);

std::string to_string(AdvantageMode m);
AdvantageMode advantage_mode_from(const std::string& s);

std::string to_string(LossAggregation a);
LossAggregation loss_aggregation_from(const std::string& s);

std::string to_string(TrajLabel l);
TrajLabel traj_label_from(const std::string& s);

std::string to_string(TrajSource s);
TrajSource traj_source_from(const std::string& s);

}  // namespace treerl
