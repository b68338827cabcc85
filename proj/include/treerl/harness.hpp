#pragma once

#include <optional>
#include <string>

#include "treerl/config.hpp"
#include "treerl/trajectory.hpp"

namespace treerl {

// Exit codes: 0 success, 2 configuration/validation failure, 1 anything else.

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

/// Runs the curriculum; writes config echo, dataset, metrics, report and a
/// resumable checkpoint under the output directory.
int cmd_train(const std::string& config_path, const CliOverrides& overrides,
              const std::optional<std::string>& resume_path = {});

struct GenDatasetOptions {
  std::optional<std::string> config_path;
  std::optional<int> count;
  std::optional<int> difficulty_min;
  std::optional<int> difficulty_max;
  std::optional<std::int64_t> start_range;
  std::optional<std::uint64_t> seed;
  std::string out_file;
};

int cmd_gen_dataset(const GenDatasetOptions& options);

/// Search-strategy comparison table over a frozen policy.
int cmd_ablate_search(const std::string& config_path, const CliOverrides& overrides);

/// Cumulative algorithm-evolution table (one curriculum run per variant and
/// seed).
int cmd_ablate_evolution(const std::string& config_path, const CliOverrides& overrides);

struct InspectOptions {
  std::string dump_path;
  int top_frontier = 5;
  std::optional<NodeId> render_terminal;
};

int cmd_inspect_tree(const InspectOptions& options);

/// TREERL_LOG=quiet|info|debug (default info).
bool log_enabled(int level);  // 0 quiet, 1 info, 2 debug
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace treerl
