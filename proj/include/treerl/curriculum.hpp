#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "treerl/config.hpp"
#include "treerl/grpo.hpp"
#include "treerl/search.hpp"

namespace treerl {

/// Environment surfaces the curriculum threads through every operation.
struct EnvHandle {
  VocabularySpec vocab;
  Verifier verifier;
  int max_steps = 64;        // direct-rollout step cap
  int max_step_tokens = 16;
};

/// Active training pool at one filtering iteration. Always a subset of the
/// previous iteration's ids.
struct HardSet {
  int iteration = 0;
  std::vector<std::string> ids;
  double delta = 0.25;
};

struct ReplayEntry {
  Trajectory trajectory;  // verified-correct at insertion
  int inserted_iteration = 0;
};

/// Problem id -> newest cached correct trajectory.
struct ReplayBuffer {
  std::map<std::string, ReplayEntry> entries;

  bool contains(const std::string& id) const { return entries.contains(id); }
};

struct IterationCounters {
  long full_mcts_invocations = 0;
  long cache_hits = 0;
  long trajectories_trained = 0;
  long terminals_sampled = 0;  // solution attempts drawn (search + direct)
};

/// {x in dataset | Pass1@K(x) < delta0}, evaluated with per-problem forked
/// rng streams so the scan order never matters.
HardSet initial_hard_subset(const EnvHandle& env,
                            std::span<const Problem> dataset,
                            const StepSampler& policy, double delta0, int k,
                            Rng& rng);

/// Threshold filter within the previous hard set; iteration index advances.
HardSet refine_hard_subset(const EnvHandle& env, const HardSet& hard,
                           const std::map<std::string, const Problem*>& by_id,
                           const StepSampler& policy, double delta, int k,
                           Rng& rng);

/// Caches one correct search trajectory for a problem that is still below
/// the Pass1@K threshold. First-discovered correct wins; latest insertion
/// replaces earlier ones. Throws IntegrityError if the candidate fails
/// re-verification.
void update_replay(const EnvHandle& env, ReplayBuffer& buffer,
                   const Problem& problem,
                   std::span<const Trajectory> search_trajectories,
                   const StepSampler& policy, double delta, int k, Rng& rng,
                   int iteration);

/// Cache hit: the stored trajectory (re-verified) plus round(beta * budget)
/// direct rollouts, with no tree search. Cache miss: one full search.
/// Degenerate incorrect/incomplete outputs are filtered either way.
std::vector<Trajectory> hybrid_rollout(const EnvHandle& env,
                                       const Problem& problem,
                                       const ReplayBuffer& buffer,
                                       const StepSampler& policy,
                                       const SearchParams& search_params,
                                       double beta, int budget, Rng& rng,
                                       IterationCounters* counters,
                                       const QClip& qclip = {},
                                       const DegenerateFilterParams& filter = {});

/// Concatenates per-problem rollout outputs in problem order; no resampling
/// or ratio balancing.
std::vector<Trajectory> build_training_set(
    std::span<const std::vector<Trajectory>> batch_results);

struct StepMetrics {
  long step = 0;
  double objective = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  double mean_advantage = 0.0;
  long trajectories = 0;
  long tokens = 0;
};

struct IterationReport {
  int iteration = 0;
  int hard_set_size = 0;        // size going into this iteration
  int hard_set_size_after = 0;  // size after refiltering
  double heldout_pass1 = 0.0;
  double heldout_hard_pass1 = 0.0;
  double objective_mean = 0.0;
  long optimizer_steps = 0;
  IterationCounters counters;
};

struct RunReport {
  int dataset_size = 0;
  int train_size = 0;
  int heldout_size = 0;
  int heldout_hard_size = 0;
  double initial_heldout_pass1 = 0.0;
  double initial_heldout_hard_pass1 = 0.0;
  std::vector<IterationReport> iterations;
  long total_optimizer_steps = 0;
  long total_trajectory_budget = 0;
  int final_policy_version = 0;
  std::string halt_reason;  // "iterations" | "hard_set_empty" | "wall_clock"
};

struct RunResult {
  LinearPolicy policy;
  RunReport report;
  std::vector<StepMetrics> metrics;
  ReplayBuffer replay;
  HardSet hard;
};

/// Resumable snapshot: policy + replay buffer + hard set.
struct Checkpoint {
  LinearPolicy policy;
  ReplayBuffer replay;
  HardSet hard;
};

/**
 * The full training loop: initial hard-subset screening, per-batch hybrid
 * rollouts + one policy update, replay-buffer population and hard-set
 * refiltering per iteration, held-out Pass1@K reporting throughout.
 *
 * Identity checks run on every invocation: the full-search counter must
 * equal the cache-miss count, hard sets must stay nested, and cached
 * trajectories must re-verify.
 *
 * Passing a checkpoint resumes from its hard set, replay buffer and policy
 * instead of screening from scratch.
 */
RunResult run_curriculum(std::span<const Problem> dataset,
                         const LinearPolicy& initial_policy,
                         const ExperimentConfig& config, Rng& rng,
                         const Checkpoint* resume = nullptr);

std::string report_to_json_text(const RunReport& report);
std::string metrics_to_jsonl(std::span<const StepMetrics> metrics);

void save_checkpoint(const std::string& path, const LinearPolicy& policy,
                     const ReplayBuffer& replay, const HardSet& hard);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace treerl
