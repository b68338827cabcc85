#include "treerl/ablate.hpp"

#include <chrono>

#include "treerl/rollout.hpp"

namespace treerl {

namespace {

constexpr std::uint64_t kTagAblationData = 0xab1a;
constexpr std::uint64_t kTagWarmup = 0xab1b;
constexpr std::uint64_t kTagTree = 0xab1c;

}  // namespace

SearchParams search_variant_params(const SearchParams& base,
                                   const std::string& name) {
  SearchParams p = base;
  p.early_stop_correct = 1;  // the ablation measures iterations-to-first-correct
  if (name == "vanilla_uct") {
    p.selection_mode = SelectionMode::vanilla_uct;
    return p;
  }
  p.selection_mode = SelectionMode::global_frontier;
  p.lambda2 = 0.0;
  if (name == "frontier_none") {
    p.depth_bonus_kind = DepthBonusKind::none;
  } else if (name == "frontier_log") {
    p.depth_bonus_kind = DepthBonusKind::log;
  } else if (name == "frontier_linear") {
    p.depth_bonus_kind = DepthBonusKind::linear;
  } else if (name == "frontier_sqrt") {
    p.depth_bonus_kind = DepthBonusKind::sqrt;
  } else if (name == "frontier_sqrt_entropy") {
    p.depth_bonus_kind = DepthBonusKind::sqrt;
    p.lambda2 = 0.4;
  } else {
    throw ConfigError("unknown search variant: " + name);
  }
  return p;
}

LinearPolicy frozen_ablation_policy(const ExperimentConfig& config, Rng& rng) {
  if (config.ablation.policy_file) return load_policy(*config.ablation.policy_file);

  // Deterministic warmup: a short curriculum run on its own small dataset.
  ExperimentConfig warm = config;
  warm.curriculum.iterations = config.ablation.warmup_iterations;
  warm.curriculum.rollout_mode = RolloutMode::hybrid;
  warm.environment.dataset.count = config.ablation.warmup_problems;
  warm.environment.dataset.difficulty_min = 1;
  warm.environment.dataset.difficulty_max =
      std::max(1, config.ablation.difficulty_max - 1);
  const VocabularySpec vocab = warm.make_vocab();
  Rng data_rng = rng.fork(kTagWarmup);
  const auto dataset =
      generate_dataset(vocab, warm.environment.dataset, data_rng.next_u64());
  LinearPolicy initial = warm.make_initial_policy();
  Rng run_rng = rng.fork(kTagWarmup + 1);
  return run_curriculum(dataset, initial, warm, run_rng).policy;
}

SearchAblation run_search_ablation(const ExperimentConfig& config,
                                   const LinearPolicy& frozen_policy,
                                   Rng& rng) {
  const AblationSpec& spec = config.ablation;
  if (spec.search_variants.empty())
    throw ConfigError("ablation.search_variants is empty");
  if (spec.seeds.empty()) throw ConfigError("ablation.seeds is empty");

  const VocabularySpec vocab = config.make_vocab();
  const Verifier verifier = exact_verifier(vocab);
  DatasetSpec data_spec;
  data_spec.count = spec.problem_count;
  data_spec.difficulty_min = spec.difficulty_min;
  data_spec.difficulty_max = spec.difficulty_max;
  data_spec.start_range = spec.start_range;
  Rng data_rng = rng.fork(kTagAblationData);
  SearchAblation ablation;
  ablation.problems = generate_dataset(vocab, data_spec, data_rng.next_u64());

  for (const std::string& name : spec.search_variants) {
    SearchVariantRow row;
    row.name = name;
    row.params = search_variant_params(config.search, name);

    std::vector<double> depths, entropies, rewards, iterations, t_iter, t_tree;
    for (std::size_t si = 0; si < spec.seeds.size(); ++si) {
      Rng seed_rng = rng.fork(kTagTree).fork(spec.seeds[si]);
      double seed_iteration_sum = 0.0;
      double seed_depth_sum = 0.0;
      long seed_depth_trees = 0;
      for (std::size_t pi = 0; pi < ablation.problems.size(); ++pi) {
        Rng tree_rng = seed_rng.fork(pi);
        const auto t0 = std::chrono::steady_clock::now();
        SearchResult result =
            run_search(ablation.problems[pi], frozen_policy, verifier,
                       row.params, vocab.ans_id(), tree_rng);
        const std::chrono::duration<double> elapsed =
            std::chrono::steady_clock::now() - t0;
        const SearchTree& tree = result.tree;

        const double iters =
            static_cast<double>(tree.first_correct_iteration.value_or(
                row.params.max_rollouts));
        iterations.push_back(iters);
        seed_iteration_sum += iters;

        if (!tree.terminal_ids.empty()) {
          double depth_sum = 0.0;
          for (NodeId id : tree.terminal_ids)
            depth_sum += static_cast<double>(tree.node(id).depth);
          const double mean_depth =
              depth_sum / static_cast<double>(tree.terminal_ids.size());
          depths.push_back(mean_depth);
          seed_depth_sum += mean_depth;
          ++seed_depth_trees;
        }
        if (!result.trajectories.empty()) {
          double h_sum = 0.0;
          double r_sum = 0.0;
          for (const Trajectory& t : result.trajectories) {
            h_sum += trajectory_entropy(tree, t.node_path.back());
            r_sum += t.terminal_reward;
          }
          entropies.push_back(h_sum / static_cast<double>(result.trajectories.size()));
          rewards.push_back(r_sum / static_cast<double>(result.trajectories.size()));
        }
        t_tree.push_back(elapsed.count());
        if (tree.iterations > 0)
          t_iter.push_back(elapsed.count() / static_cast<double>(tree.iterations));
      }
      row.per_seed_mean_iterations.push_back(
          seed_iteration_sum / static_cast<double>(ablation.problems.size()));
      row.per_seed_mean_depth.push_back(
          seed_depth_trees > 0 ? seed_depth_sum / static_cast<double>(seed_depth_trees)
                               : 0.0);
    }
    row.depth = mean_std(depths);
    row.entropy = mean_std(entropies);
    row.reward = mean_std(rewards);
    row.iterations = mean_std(iterations);
    row.time_per_iteration_s = mean_std(t_iter);
    row.time_per_tree_s = mean_std(t_tree);
    ablation.rows.push_back(std::move(row));
  }
  return ablation;
}

void apply_evolution_variant(const std::string& name, SearchParams& search,
                             TrainParams& train) {
  search.selection_mode = SelectionMode::vanilla_uct;
  search.backup_rule = BackupRule::constrained;
  if (name == "vanilla_q_outcome") {
    search.backup_rule = BackupRule::vanilla;
    train.advantage_mode = AdvantageMode::outcome;
  } else if (name == "constrained_q_outcome") {
    train.advantage_mode = AdvantageMode::outcome;
  } else if (name == "node_raw") {
    train.advantage_mode = AdvantageMode::node_raw;
  } else if (name == "node_standard") {
    train.advantage_mode = AdvantageMode::node_standard;
  } else if (name == "node_mean_only") {
    train.advantage_mode = AdvantageMode::node_mean_only;
  } else if (name == "frontier_selection") {
    train.advantage_mode = AdvantageMode::node_mean_only;
    search.selection_mode = SelectionMode::global_frontier;
  } else {
    throw ConfigError("unknown evolution variant: " + name);
  }
}

std::vector<EvolutionRow> run_evolution_ablation(const ExperimentConfig& config,
                                                 Rng& rng) {
  const AblationSpec& spec = config.ablation;
  if (spec.evolution_variants.empty())
    throw ConfigError("ablation.evolution_variants is empty");
  if (spec.seeds.empty()) throw ConfigError("ablation.seeds is empty");
  const VocabularySpec vocab = config.make_vocab();

  std::vector<EvolutionRow> rows;
  for (const std::string& name : spec.evolution_variants) {
    ExperimentConfig variant = config;
    apply_evolution_variant(name, variant.search, variant.train);

    EvolutionRow row;
    row.name = name;
    double initial_sum = 0.0;
    for (std::uint64_t seed : spec.seeds) {
      Rng seed_rng = rng.fork(seed);
      Rng data_rng = seed_rng.fork(kTagAblationData);
      const auto dataset = generate_dataset(vocab, variant.environment.dataset,
                                            data_rng.next_u64());
      LinearPolicy initial = variant.make_initial_policy();
      Rng run_rng = seed_rng.fork(kTagTree + 99);
      const RunResult result = run_curriculum(dataset, initial, variant, run_rng);
      initial_sum += result.report.initial_heldout_pass1;
      const double final_pass1 = result.report.iterations.empty()
                                     ? result.report.initial_heldout_pass1
                                     : result.report.iterations.back().heldout_pass1;
      row.per_seed_final.push_back(final_pass1);
    }
    row.initial_heldout_pass1 = initial_sum / static_cast<double>(spec.seeds.size());
    row.final_heldout_pass1 = mean_std(row.per_seed_final);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace treerl
