#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "treerl/common.hpp"
#include "treerl/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"tree-search-driven policy optimization on verifiable arithmetic tasks"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> resume_path;

  auto* train = app.add_subcommand("train", "run the full training curriculum");
  train->add_option("--config", config_path, "experiment config (JSON)")->required();
  train->add_option("--seed", seed, "seed override");
  train->add_option("--out", out_dir, "output directory override");
  train->add_option("--resume", resume_path, "checkpoint to resume from");

  treerl::GenDatasetOptions gen;
  auto* gen_dataset = app.add_subcommand("gen-dataset", "generate a problem dataset");
  gen_dataset->add_option("--config", gen.config_path, "experiment config (JSON)");
  gen_dataset->add_option("--count", gen.count, "number of problems");
  gen_dataset->add_option("--difficulty-min", gen.difficulty_min, "minimal op count");
  gen_dataset->add_option("--difficulty-max", gen.difficulty_max, "maximal op count");
  gen_dataset->add_option("--start-range", gen.start_range, "start value range");
  gen_dataset->add_option("--seed", gen.seed, "seed override");
  gen_dataset->add_option("--out", gen.out_file, "output dataset file")->required();

  auto* ablate_search =
      app.add_subcommand("ablate-search", "compare search strategies with a frozen policy");
  ablate_search->add_option("--config", config_path, "experiment config (JSON)")->required();
  ablate_search->add_option("--seed", seed, "seed override");
  ablate_search->add_option("--out", out_dir, "output directory override");

  auto* ablate_evolution =
      app.add_subcommand("ablate-evolution", "cumulative algorithm-evolution study");
  ablate_evolution->add_option("--config", config_path, "experiment config (JSON)")->required();
  ablate_evolution->add_option("--seed", seed, "seed override");
  ablate_evolution->add_option("--out", out_dir, "output directory override");

  treerl::InspectOptions inspect;
  auto* inspect_tree = app.add_subcommand("inspect-tree", "summarize a tree dump");
  inspect_tree->add_option("dump", inspect.dump_path, "tree dump file")->required();
  inspect_tree->add_option("--top", inspect.top_frontier, "frontier scores to list");
  inspect_tree->add_option("--path", inspect.render_terminal,
                           "render the root-to-node path for this node id");

  CLI11_PARSE(app, argc, argv);

  try {
    const treerl::CliOverrides overrides{seed, out_dir};
    if (train->parsed()) return treerl::cmd_train(config_path, overrides, resume_path);
    if (gen_dataset->parsed()) return treerl::cmd_gen_dataset(gen);
    if (ablate_search->parsed()) return treerl::cmd_ablate_search(config_path, overrides);
    if (ablate_evolution->parsed())
      return treerl::cmd_ablate_evolution(config_path, overrides);
    if (inspect_tree->parsed()) return treerl::cmd_inspect_tree(inspect);
  } catch (const treerl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
