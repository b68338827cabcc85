#pragma once

#include <optional>
#include <string>
#include <vector>

#include "treerl/environment.hpp"
#include "treerl/grpo.hpp"
#include "treerl/tree.hpp"

namespace treerl {

struct EnvironmentConfig {
  std::string vocab = "standard";  // "standard" or "compact"
  DatasetSpec dataset;
  std::optional<std::string> dataset_file;  // load instead of generating
};

/// Where the base policy comes from: the built-in heuristic prior (the
/// stand-in for a pretrained model), flat-zero weights, or a checkpoint.
struct InitialPolicyConfig {
  std::string kind = "heuristic";  // "heuristic" | "zero" | "file"
  double strength = 1.5;
  std::optional<std::string> file;
};

enum class RolloutMode { hybrid, flat };

struct CurriculumConfig {
  int iterations = 3;
  int batch_size = 32;
  double delta = 0.25;                  // Pass1@K filtering threshold
  std::vector<double> delta_schedule;   // optional per-iteration overrides
  int pass_k = 4;
  double beta = 0.5;                    // direct-rollout fraction on cache hits
  int rollout_budget = 8;               // B, the standard sampling budget
  double heldout_fraction = 0.1;
  double eval_temperature = 0.6;        // held-out reporting only
  std::optional<double> wall_clock_budget_s;
  RolloutMode rollout_mode = RolloutMode::hybrid;
  int flat_rollouts_per_problem = 8;    // flat-baseline budget per problem
};

/// Settings for the two ablation suites; only read by the ablate commands.
struct AblationSpec {
  std::vector<std::string> search_variants = {
      "vanilla_uct", "frontier_none", "frontier_log", "frontier_linear",
      "frontier_sqrt"};
  std::vector<std::string> evolution_variants = {
      "vanilla_q_outcome", "constrained_q_outcome", "node_raw",
      "node_standard", "node_mean_only", "frontier_selection"};
  int problem_count = 200;
  int difficulty_min = 3;
  int difficulty_max = 4;
  std::int64_t start_range = 20;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::optional<std::string> policy_file;  // frozen policy; warmup when absent
  int warmup_problems = 256;
  int warmup_iterations = 1;
};

/**
 * Everything a run needs, serializable as one JSON document. A run archives
 * the exact config beside its outputs.
 */
struct ExperimentConfig {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  EnvironmentConfig environment;
  InitialPolicyConfig initial_policy;
  SearchParams search;
  TrainParams train;
  CurriculumConfig curriculum;
  AblationSpec ablation;

  VocabularySpec make_vocab() const;
  LinearPolicy make_initial_policy() const;

  /// Throws ConfigError listing every problem at once.
  void validate(bool require_seed_and_out = false) const;
};

ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json_text(const ExperimentConfig& config);
void save_config(const std::string& path, const ExperimentConfig& config);

}  // namespace treerl
