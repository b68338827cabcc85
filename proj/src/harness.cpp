#include "treerl/harness.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "treerl/ablate.hpp"
#include "treerl/curriculum.hpp"
#include "treerl/names.hpp"
#include "treerl/search.hpp"
#include "treerl/stats.hpp"
#include "treerl/tree_io.hpp"

namespace treerl {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

int log_level() {
  static const int level = [] {
    const char* raw = std::getenv("TREERL_LOG");
    if (!raw) return 1;
    const std::string v(raw);
    if (v == "quiet") return 0;
    if (v == "debug") return 2;
    return 1;
  }();
  return level;
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << body;
}

std::string format_mean_std(const MeanStd& m, int precision = 2) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << m.mean << " +- " << m.std;
  return s.str();
}

json search_params_echo(const SearchParams& p) {
  return json{{"selection_mode", to_string(p.selection_mode)},
              {"depth_bonus", to_string(p.depth_bonus_kind)},
              {"lambda1", p.lambda1},
              {"lambda2", p.lambda2},
              {"lambda3", p.lambda3},
              {"uct_lambda", p.uct_lambda},
              {"max_depth", p.max_depth},
              {"expansion_width", p.expansion_width},
              {"max_rollouts", p.max_rollouts},
              {"backup_rule", to_string(p.backup_rule)}};
}

}  // namespace

bool log_enabled(int level) { return log_level() >= level; }

void log_info(const std::string& message) {
  if (log_enabled(1)) std::cerr << "[treerl] " << message << "\n";
}

void log_debug(const std::string& message) {
  if (log_enabled(2)) std::cerr << "[treerl:debug] " << message << "\n";
}

int cmd_train(const std::string& config_path, const CliOverrides& overrides,
              const std::optional<std::string>& resume_path) {
  ExperimentConfig config = load_config(config_path);
  if (overrides.seed) config.seed = overrides.seed;
  if (overrides.out_dir) config.out_dir = overrides.out_dir;
  config.validate(/*require_seed_and_out=*/true);

  const fs::path out_dir(*config.out_dir);
  fs::create_directories(out_dir);
  write_file(out_dir / "config.json", config_to_json_text(config) + "\n");

  const VocabularySpec vocab = config.make_vocab();
  Rng rng(*config.seed);

  std::vector<Problem> dataset;
  if (config.environment.dataset_file) {
    dataset = load_dataset(*config.environment.dataset_file);
    log_info("loaded " + std::to_string(dataset.size()) + " problems from " +
             *config.environment.dataset_file);
  } else {
    Rng data_rng = rng.fork(0xda7a);
    dataset = generate_dataset(vocab, config.environment.dataset, data_rng.next_u64());
    save_dataset((out_dir / "dataset.jsonl").string(), dataset);
    log_info("generated " + std::to_string(dataset.size()) + " problems");
  }

  std::optional<Checkpoint> resume;
  if (resume_path) resume = load_checkpoint(*resume_path);

  LinearPolicy initial = config.make_initial_policy();
  Rng run_rng = rng.fork(0x52);
  const RunResult result = run_curriculum(dataset, initial, config, run_rng,
                                          resume ? &*resume : nullptr);

  write_file(out_dir / "report.json", report_to_json_text(result.report) + "\n");
  write_file(out_dir / "metrics.jsonl", metrics_to_jsonl(result.metrics));
  save_checkpoint((out_dir / "checkpoint.json").string(), result.policy,
                  result.replay, result.hard);

  log_info("halt: " + result.report.halt_reason + ", optimizer steps " +
           std::to_string(result.report.total_optimizer_steps));
  if (!result.report.iterations.empty()) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << "held-out Pass1@K "
      << result.report.initial_heldout_pass1 << " -> "
      << result.report.iterations.back().heldout_pass1;
    log_info(s.str());
  }
  return 0;
}

int cmd_gen_dataset(const GenDatasetOptions& options) {
  ExperimentConfig config;
  if (options.config_path) config = load_config(*options.config_path);
  if (options.count) config.environment.dataset.count = *options.count;
  if (options.difficulty_min)
    config.environment.dataset.difficulty_min = *options.difficulty_min;
  if (options.difficulty_max)
    config.environment.dataset.difficulty_max = *options.difficulty_max;
  if (options.start_range) config.environment.dataset.start_range = *options.start_range;
  if (options.seed) config.seed = options.seed;
  if (!config.seed) throw ConfigError("seed is missing (config field \"seed\" or --seed)");
  if (options.out_file.empty()) throw ConfigError("gen-dataset needs --out FILE");

  const VocabularySpec vocab = config.make_vocab();
  Rng rng = Rng(*config.seed).fork(0xda7a);
  const auto dataset =
      generate_dataset(vocab, config.environment.dataset, rng.next_u64());
  save_dataset(options.out_file, dataset);
  log_info("wrote " + std::to_string(dataset.size()) + " problems to " +
           options.out_file);
  return 0;
}

int cmd_ablate_search(const std::string& config_path, const CliOverrides& overrides) {
  ExperimentConfig config = load_config(config_path);
  if (overrides.seed) config.seed = overrides.seed;
  if (overrides.out_dir) config.out_dir = overrides.out_dir;
  config.validate(/*require_seed_and_out=*/true);

  const fs::path out_dir(*config.out_dir);
  fs::create_directories(out_dir);
  write_file(out_dir / "config.json", config_to_json_text(config) + "\n");

  Rng rng(*config.seed);
  log_info("preparing frozen policy");
  const LinearPolicy frozen = frozen_ablation_policy(config, rng);
  log_info("running search ablation over " +
           std::to_string(config.ablation.problem_count) + " problems x " +
           std::to_string(config.ablation.seeds.size()) + " seeds");
  const SearchAblation ablation = run_search_ablation(config, frozen, rng);

  std::ostringstream table;
  table << std::left << std::setw(24) << "variant" << std::setw(10) << "bonus"
        << std::setw(16) << "depth" << std::setw(16) << "entropy"
        << std::setw(16) << "reward" << std::setw(18) << "num_iter"
        << std::setw(18) << "t/iter (s)" << std::setw(18) << "t/tree (s)" << "\n";
  std::ostringstream tsv;
  tsv << "variant\tdepth_mean\tdepth_std\tentropy_mean\tentropy_std\t"
         "reward_mean\treward_std\titer_mean\titer_std\ttime_per_iter_mean\t"
         "time_per_iter_std\ttime_per_tree_mean\ttime_per_tree_std\tparams\n";
  for (const SearchVariantRow& row : ablation.rows) {
    table << std::left << std::setw(24) << row.name << std::setw(10)
          << to_string(row.params.depth_bonus_kind) << std::setw(16)
          << format_mean_std(row.depth) << std::setw(16)
          << format_mean_std(row.entropy) << std::setw(16)
          << format_mean_std(row.reward) << std::setw(18)
          << format_mean_std(row.iterations, 1) << std::setw(18)
          << format_mean_std(row.time_per_iteration_s, 4) << std::setw(18)
          << format_mean_std(row.time_per_tree_s, 4) << "\n";
    tsv << row.name << "\t" << row.depth.mean << "\t" << row.depth.std << "\t"
        << row.entropy.mean << "\t" << row.entropy.std << "\t"
        << row.reward.mean << "\t" << row.reward.std << "\t"
        << row.iterations.mean << "\t" << row.iterations.std << "\t"
        << row.time_per_iteration_s.mean << "\t" << row.time_per_iteration_s.std
        << "\t" << row.time_per_tree_s.mean << "\t" << row.time_per_tree_s.std
        << "\t" << search_params_echo(row.params).dump() << "\n";
  }

  // Headline comparison when both rows are present: does global frontier
  // selection reach a first correct terminal in fewer iterations?
  const auto find_row = [&](const std::string& name) -> const SearchVariantRow* {
    for (const auto& r : ablation.rows)
      if (r.name == name) return &r;
    return nullptr;
  };
  const SearchVariantRow* vanilla = find_row("vanilla_uct");
  const SearchVariantRow* frontier = find_row("frontier_sqrt");
  if (vanilla && frontier && vanilla->per_seed_mean_iterations.size() >= 2) {
    const PairedTTest test = paired_t_test(vanilla->per_seed_mean_iterations,
                                           frontier->per_seed_mean_iterations);
    std::ostringstream s;
    s << std::fixed << std::setprecision(4)
      << "vanilla_uct vs frontier_sqrt mean iterations: "
      << mean_std(vanilla->per_seed_mean_iterations).mean << " -> "
      << mean_std(frontier->per_seed_mean_iterations).mean
      << " (one-sided p = " << test.p_one_sided << ")";
    table << s.str() << "\n";
  }

  std::cout << table.str();
  write_file(out_dir / "search_ablation.txt", table.str());
  write_file(out_dir / "search_ablation.tsv", tsv.str());
  return 0;
}

int cmd_ablate_evolution(const std::string& config_path,
                         const CliOverrides& overrides) {
  ExperimentConfig config = load_config(config_path);
  if (overrides.seed) config.seed = overrides.seed;
  if (overrides.out_dir) config.out_dir = overrides.out_dir;
  config.validate(/*require_seed_and_out=*/true);

  const fs::path out_dir(*config.out_dir);
  fs::create_directories(out_dir);
  write_file(out_dir / "config.json", config_to_json_text(config) + "\n");

  Rng rng(*config.seed);
  const auto rows = run_evolution_ablation(config, rng);

  std::ostringstream table;
  table << std::left << std::setw(26) << "variant" << std::setw(20)
        << "heldout_pass1" << "per-seed" << "\n";
  std::ostringstream tsv;
  tsv << "variant\tpass1_mean\tpass1_std\tper_seed\tadvantage_mode\tselection_mode\tbackup_rule\n";
  for (const EvolutionRow& row : rows) {
    SearchParams sp = config.search;
    TrainParams tp = config.train;
    apply_evolution_variant(row.name, sp, tp);
    std::ostringstream seeds;
    seeds << std::fixed << std::setprecision(4);
    for (double v : row.per_seed_final) seeds << v << " ";
    table << std::left << std::setw(26) << row.name << std::setw(20)
          << format_mean_std(row.final_heldout_pass1, 4) << seeds.str() << "\n";
    tsv << row.name << "\t" << row.final_heldout_pass1.mean << "\t"
        << row.final_heldout_pass1.std << "\t" << seeds.str() << "\t"
        << to_string(tp.advantage_mode) << "\t" << to_string(sp.selection_mode)
        << "\t" << to_string(sp.backup_rule) << "\n";
  }
  std::cout << table.str();
  write_file(out_dir / "evolution.txt", table.str());
  write_file(out_dir / "evolution.tsv", tsv.str());
  return 0;
}

int cmd_inspect_tree(const InspectOptions& options) {
  const LoadedTree loaded = load_tree(options.dump_path);
  const SearchTree& tree = loaded.tree;

  std::map<int, int> depth_histogram;
  int n_correct = 0, n_incorrect = 0, n_incomplete = 0;
  for (NodeId id = 0; id < tree.size(); ++id) {
    const Node& n = tree.node(id);
    depth_histogram[n.depth] += 1;
    if (n.status == NodeStatus::terminal_correct) ++n_correct;
    else if (n.status == NodeStatus::terminal_incorrect) ++n_incorrect;
    else if (n.status == NodeStatus::terminal_incomplete) ++n_incomplete;
  }

  std::cout << "problem " << tree.problem.id << ": " << tree.problem.start_value
            << " -> " << tree.problem.target_value << " (difficulty "
            << tree.problem.difficulty << ")\n";
  std::cout << "nodes " << tree.size() << ", iterations " << tree.iterations
            << ", backups " << tree.rollout_count << "\n";
  std::cout << "terminals: correct " << n_correct << ", incorrect " << n_incorrect
            << ", incomplete " << n_incomplete << "\n";
  std::cout << "depth histogram:\n";
  for (const auto& [depth, count] : depth_histogram)
    std::cout << "  d=" << depth << ": " << count << "\n";

  const auto& frontier = compute_frontier(tree);
  std::vector<std::pair<double, NodeId>> scored;
  for (NodeId id : frontier) scored.emplace_back(frontier_priority(tree, id), id);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::cout << "frontier: " << frontier.size() << " nodes; top scores:\n";
  const int top = std::min<int>(options.top_frontier, static_cast<int>(scored.size()));
  std::cout << std::fixed << std::setprecision(6);
  for (int i = 0; i < top; ++i)
    std::cout << "  node " << scored[static_cast<std::size_t>(i)].second << ": F="
              << scored[static_cast<std::size_t>(i)].first << "\n";

  if (options.render_terminal) {
    const NodeId terminal = *options.render_terminal;
    if (terminal >= tree.size()) throw ConfigError("node id out of range");
    std::cout << "path to node " << terminal << ":\n";
    for (NodeId id : path_ids(tree, terminal)) {
      const Node& n = tree.node(id);
      std::cout << "  [" << id << "] d=" << n.depth << " q=" << n.q_value
                << " visits=" << n.visit_count << " " << to_string(n.status)
                << " tokens:";
      for (Token t : n.step_tokens) {
        if (!loaded.token_names.empty() &&
            t < static_cast<Token>(loaded.token_names.size()))
          std::cout << " " << loaded.token_names[static_cast<std::size_t>(t)];
        else
          std::cout << " " << t;
      }
      std::cout << "\n";
    }
  }
  return 0;
}

}  // namespace treerl
