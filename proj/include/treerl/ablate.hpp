#pragma once

#include <string>
#include <vector>

#include "treerl/config.hpp"
#include "treerl/curriculum.hpp"
#include "treerl/stats.hpp"

namespace treerl {

/// Search params for one named ablation variant, derived from a base.
/// Known names: vanilla_uct, frontier_none, frontier_log, frontier_linear,
/// frontier_sqrt, frontier_sqrt_entropy.
SearchParams search_variant_params(const SearchParams& base,
                                   const std::string& name);

struct SearchVariantRow {
  std::string name;
  SearchParams params;
  MeanStd depth;          // mean terminal depth per tree, pooled over trees
  MeanStd entropy;        // mean trajectory entropy per tree
  MeanStd reward;         // mean trajectory reward per tree
  MeanStd iterations;     // rollout iterations to first correct (or budget)
  MeanStd time_per_iteration_s;
  MeanStd time_per_tree_s;
  std::vector<double> per_seed_mean_iterations;
  std::vector<double> per_seed_mean_depth;
};

struct SearchAblation {
  std::vector<Problem> problems;
  std::vector<SearchVariantRow> rows;
};

/// Runs every variant over the same problem set and seeds with a frozen
/// policy. Searches stop at the first correct terminal; the rollout budget
/// is charged when none is found.
SearchAblation run_search_ablation(const ExperimentConfig& config,
                                   const LinearPolicy& frozen_policy,
                                   Rng& rng);

/// The frozen policy for ablations: loaded from ablation.policy_file when
/// set, otherwise produced by a deterministic warmup training run.
LinearPolicy frozen_ablation_policy(const ExperimentConfig& config, Rng& rng);

/// Search/training settings for one step of the algorithm-evolution stack.
/// Known names: vanilla_q_outcome, constrained_q_outcome, node_raw,
/// node_standard, node_mean_only, frontier_selection.
void apply_evolution_variant(const std::string& name, SearchParams& search,
                             TrainParams& train);

struct EvolutionRow {
  std::string name;
  double initial_heldout_pass1 = 0.0;
  MeanStd final_heldout_pass1;
  std::vector<double> per_seed_final;
};

/// One full curriculum run per (variant, seed); reports held-out Pass1@K.
std::vector<EvolutionRow> run_evolution_ablation(const ExperimentConfig& config,
                                                 Rng& rng);

}  // namespace treerl
