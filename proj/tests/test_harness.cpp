#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "treerl/ablate.hpp"
#include "treerl/config.hpp"
#include "treerl/harness.hpp"
#include "treerl/stats.hpp"
#include "treerl/tree_io.hpp"

#include "test_support.hpp"

using namespace treerl;
using namespace treerl::testing;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write(const fs::path& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

// Runs the installed CLI binary; returns (exit code, stdout+stderr).
std::pair<int, std::string> run_cli(const std::string& args) {
  const std::string command = std::string(TREERL_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> chunk{};
  std::string output;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(chunk.data(), chunk.size(), pipe)) output += chunk.data();
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), output};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config parse -> serialize -> parse is a fixed point") {
  const std::string text = R"({
    "seed": 42,
    "out_dir": "runs/x",
    "environment": {"dataset": {"count": 100, "difficulty_max": 4}},
    "search": {"max_depth": 16, "expansion_width": 4, "lambda2": 0.4},
    "train": {"learning_rate": 0.25, "advantage_mode": "outcome"},
    "curriculum": {"iterations": 2, "delta": 0.3}
  })";
  const ExperimentConfig a = config_from_json_text(text);
  const std::string serialized = config_to_json_text(a);
  const ExperimentConfig b = config_from_json_text(serialized);
  CHECK(config_to_json_text(b) == serialized);
  CHECK(a.search.max_depth == 16);
  CHECK(a.train.advantage_mode == AdvantageMode::outcome);
  CHECK(a.curriculum.delta == 0.3);
}

TEST_CASE("config validation names offending fields, all at once") {
  SUBCASE("out-of-range delta") {
    const ExperimentConfig config =
        config_from_json_text(R"({"curriculum": {"delta": 1.5}})");
    try {
      config.validate();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("curriculum.delta") != std::string::npos);
    }
  }

  SUBCASE("missing seed and out_dir are reported together") {
    const ExperimentConfig config = config_from_json_text("{}");
    try {
      config.validate(/*require_seed_and_out=*/true);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("seed") != std::string::npos);
      CHECK(msg.find("out") != std::string::npos);
    }
  }

  SUBCASE("several invalid fields in one message") {
    const ExperimentConfig config = config_from_json_text(
        R"({"curriculum": {"delta": 1.5, "beta": 0.0}, "search": {"max_depth": 0}})");
    try {
      config.validate();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("curriculum.delta") != std::string::npos);
      CHECK(msg.find("curriculum.beta") != std::string::npos);
      CHECK(msg.find("search.max_depth") != std::string::npos);
    }
  }

  SUBCASE("unknown keys are rejected") {
    CHECK_THROWS_AS(config_from_json_text(R"({"serach": {}})"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"({"search": {"max_dept": 3}})"),
                    ConfigError);
  }
}

TEST_CASE("cmd_train writes a deterministic report") {
  TempDir dir("treerl_train_test");
  const std::string config_text = R"({
    "seed": 5,
    "environment": {"dataset": {"count": 8, "difficulty_min": 1, "difficulty_max": 1}},
    "search": {"max_depth": 3, "expansion_width": 2, "max_rollouts": 3,
               "early_stop_correct": 1, "max_step_tokens": 10},
    "train": {"learning_rate": 0.1},
    "curriculum": {"iterations": 1, "batch_size": 4, "heldout_fraction": 0.25}
  })";
  write(dir.path / "config.json", config_text);

  CliOverrides overrides;
  overrides.out_dir = (dir.path / "run_a").string();
  CHECK(cmd_train((dir.path / "config.json").string(), overrides) == 0);
  CHECK(fs::exists(dir.path / "run_a" / "report.json"));
  CHECK(fs::exists(dir.path / "run_a" / "metrics.jsonl"));
  CHECK(fs::exists(dir.path / "run_a" / "config.json"));
  CHECK(fs::exists(dir.path / "run_a" / "checkpoint.json"));

  overrides.out_dir = (dir.path / "run_b").string();
  CHECK(cmd_train((dir.path / "config.json").string(), overrides) == 0);
  CHECK(slurp(dir.path / "run_a" / "report.json") ==
        slurp(dir.path / "run_b" / "report.json"));
  CHECK(slurp(dir.path / "run_a" / "metrics.jsonl") ==
        slurp(dir.path / "run_b" / "metrics.jsonl"));

  // A different seed changes the report body.
  overrides.out_dir = (dir.path / "run_c").string();
  overrides.seed = 6;
  CHECK(cmd_train((dir.path / "config.json").string(), overrides) == 0);
  CHECK(slurp(dir.path / "run_a" / "report.json") !=
        slurp(dir.path / "run_c" / "report.json"));
}

TEST_CASE("CLI exit codes: success, validation failure, missing input") {
  TempDir dir("treerl_cli_test");
  write(dir.path / "bad.json", R"({"curriculum": {"delta": 1.5}})");
  const auto [bad_code, bad_out] =
      run_cli("train --config " + (dir.path / "bad.json").string() + " --seed 1 --out " +
              (dir.path / "out").string());
  CHECK(bad_code == 2);
  CHECK(bad_out.find("curriculum.delta") != std::string::npos);

  const auto [missing_code, missing_out] =
      run_cli("train --config " + (dir.path / "absent.json").string());
  CHECK(missing_code == 2);
  CHECK(missing_out.find("absent.json") != std::string::npos);

  write(dir.path / "ok.json", R"({
    "seed": 3,
    "environment": {"dataset": {"count": 4, "difficulty_min": 1, "difficulty_max": 1}},
    "search": {"max_depth": 3, "expansion_width": 2, "max_rollouts": 2,
               "early_stop_correct": 1, "max_step_tokens": 10},
    "train": {"learning_rate": 0.1},
    "curriculum": {"iterations": 1, "batch_size": 4, "heldout_fraction": 0.25}
  })");
  const auto [ok_code, ok_out] =
      run_cli("train --config " + (dir.path / "ok.json").string() + " --out " +
              (dir.path / "out").string());
  CHECK(ok_code == 0);
  (void)ok_out;
}

TEST_CASE("gen-dataset CLI writes a loadable deterministic dataset") {
  TempDir dir("treerl_gen_test");
  const std::string out_a = (dir.path / "a.jsonl").string();
  const std::string out_b = (dir.path / "b.jsonl").string();
  const auto [code_a, out1] =
      run_cli("gen-dataset --count 12 --difficulty-min 1 --difficulty-max 2 --seed 9 --out " + out_a);
  REQUIRE(code_a == 0);
  const auto [code_b, out2] =
      run_cli("gen-dataset --count 12 --difficulty-min 1 --difficulty-max 2 --seed 9 --out " + out_b);
  REQUIRE(code_b == 0);
  (void)out1;
  (void)out2;
  CHECK(slurp(out_a) == slurp(out_b));
  const auto problems = load_dataset(out_a);
  CHECK(problems.size() == 12);
}

TEST_CASE("inspect-tree summarizes dumps and renders paths") {
  TempDir dir("treerl_inspect_test");
  const VocabularySpec vocab = VocabularySpec::standard();

  SUBCASE("single-node tree") {
    SearchParams params;
    const SearchTree tree = make_tree(make_problem(5, 7, 1, "i0"), params, vocab.ans_id());
    save_tree((dir.path / "one.json").string(), tree, &vocab);
    const auto [code, out] = run_cli("inspect-tree " + (dir.path / "one.json").string());
    CHECK(code == 0);
    CHECK(out.find("nodes 1") != std::string::npos);
    CHECK(out.find("correct 0, incorrect 0, incomplete 0") != std::string::npos);
  }

  SUBCASE("terminal partition counts") {
    SearchParams params;
    SearchTree tree = make_tree(make_problem(5, 7, 1, "i1"), params, vocab.ans_id());
    add_node(tree, 0, NodeStatus::terminal_correct);
    add_node(tree, 0, NodeStatus::terminal_correct);
    add_node(tree, 0, NodeStatus::terminal_incorrect);
    save_tree((dir.path / "three.json").string(), tree, &vocab);
    const auto [code, out] = run_cli("inspect-tree " + (dir.path / "three.json").string());
    CHECK(code == 0);
    CHECK(out.find("correct 2, incorrect 1, incomplete 0") != std::string::npos);
  }

  SUBCASE("frontier scores match recomputation on a real search tree") {
    const Verifier verifier = exact_verifier(vocab);
    SearchParams params;
    params.max_depth = 3;
    params.expansion_width = 2;
    params.max_rollouts = 3;
    LinearPolicy uniform(vocab);
    Rng rng(21);
    const SearchResult result = run_search(make_problem(4, 9, 2, "i2"), uniform,
                                           verifier, params, vocab.ans_id(), rng);
    save_tree((dir.path / "search.json").string(), result.tree, &vocab);

    const LoadedTree loaded = load_tree((dir.path / "search.json").string());
    const auto& frontier = compute_frontier(loaded.tree);
    double best = -1e30;
    for (NodeId id : frontier) best = std::max(best, frontier_priority(loaded.tree, id));

    const auto [code, out] =
        run_cli("inspect-tree " + (dir.path / "search.json").string() + " --top 1");
    CHECK(code == 0);
    if (!frontier.empty()) {
      std::ostringstream expected;
      expected << "F=" << std::fixed << std::setprecision(6) << best;
      CHECK(out.find(expected.str()) != std::string::npos);
    }

    if (!result.tree.terminal_ids.empty()) {
      const auto [path_code, path_out] =
          run_cli("inspect-tree " + (dir.path / "search.json").string() + " --path " +
                  std::to_string(result.tree.terminal_ids.front()));
      CHECK(path_code == 0);
      CHECK(path_out.find("path to node") != std::string::npos);
    }
  }

  SUBCASE("corrupt dumps report the byte offset") {
    write(dir.path / "corrupt.json", "{\"format_version\": 1, !!!");
    const auto [code, out] = run_cli("inspect-tree " + (dir.path / "corrupt.json").string());
    CHECK(code == 2);
    CHECK(out.find("byte") != std::string::npos);
  }
}

TEST_CASE("tree dumps round-trip through save and load") {
  const VocabularySpec vocab = VocabularySpec::standard();
  const Verifier verifier = exact_verifier(vocab);
  SearchParams params;
  params.max_depth = 3;
  params.expansion_width = 2;
  params.max_rollouts = 4;
  LinearPolicy uniform(vocab);
  Rng rng(22);
  const SearchResult result = run_search(make_problem(2, 8, 2, "rt"), uniform,
                                         verifier, params, vocab.ans_id(), rng);
  const std::string text = tree_to_json(result.tree, &vocab);
  const LoadedTree loaded = tree_from_json(text);
  REQUIRE(loaded.tree.size() == result.tree.size());
  for (NodeId id = 0; id < result.tree.size(); ++id) {
    CHECK(loaded.tree.node(id).parent == result.tree.node(id).parent);
    CHECK(loaded.tree.node(id).children == result.tree.node(id).children);
    CHECK(loaded.tree.node(id).depth == result.tree.node(id).depth);
    CHECK(loaded.tree.node(id).status == result.tree.node(id).status);
    CHECK(loaded.tree.node(id).q_value == result.tree.node(id).q_value);
    CHECK(loaded.tree.node(id).visit_count == result.tree.node(id).visit_count);
    CHECK(loaded.tree.node(id).step_entropy == result.tree.node(id).step_entropy);
    CHECK(loaded.tree.node(id).step_tokens == result.tree.node(id).step_tokens);
  }
  CHECK(loaded.tree.rollout_count == result.tree.rollout_count);
  CHECK(loaded.tree.terminal_ids == result.tree.terminal_ids);
  CHECK(loaded.token_names.size() == static_cast<std::size_t>(vocab.size()));
}

TEST_CASE("search ablation produces one complete row per variant") {
  ExperimentConfig config;
  config.seed = 3;
  config.search.max_depth = 3;
  config.search.expansion_width = 2;
  config.search.max_rollouts = 4;
  config.search.max_step_tokens = 10;
  config.ablation.search_variants = {"vanilla_uct", "frontier_sqrt"};
  config.ablation.problem_count = 10;
  config.ablation.difficulty_min = 1;
  config.ablation.difficulty_max = 2;
  config.ablation.seeds = {1, 2};

  const VocabularySpec vocab = config.make_vocab();
  const LinearPolicy frozen = blended_policy(vocab, 2.0);
  Rng rng(3);
  const SearchAblation ablation = run_search_ablation(config, frozen, rng);
  REQUIRE(ablation.rows.size() == 2);
  CHECK(ablation.problems.size() == 10);
  for (const SearchVariantRow& row : ablation.rows) {
    CHECK(row.iterations.n == 20);  // problems x seeds
    CHECK(row.time_per_tree_s.n == 20);
    CHECK(row.per_seed_mean_iterations.size() == 2);
    CHECK(row.iterations.mean > 0.0);
  }
  CHECK(ablation.rows[0].params.selection_mode == SelectionMode::vanilla_uct);
  CHECK(ablation.rows[1].params.selection_mode == SelectionMode::global_frontier);
  CHECK(ablation.rows[1].params.early_stop_correct == 1);

  CHECK_THROWS_AS(search_variant_params(config.search, "nonsense"), ConfigError);
}

TEST_CASE("evolution ablation runs the whole cumulative stack") {
  ExperimentConfig config;
  config.seed = 4;
  config.environment.dataset.count = 6;
  config.environment.dataset.difficulty_min = 1;
  config.environment.dataset.difficulty_max = 1;
  config.search.max_depth = 3;
  config.search.expansion_width = 2;
  config.search.max_rollouts = 3;
  config.search.early_stop_correct = 1;
  config.search.max_step_tokens = 10;
  config.train.learning_rate = 0.1;
  config.curriculum.iterations = 1;
  config.curriculum.batch_size = 4;
  config.curriculum.heldout_fraction = 0.25;
  config.ablation.seeds = {1};

  Rng rng(4);
  const auto rows = run_evolution_ablation(config, rng);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].name == "vanilla_q_outcome");
  CHECK(rows[5].name == "frontier_selection");
  for (const EvolutionRow& row : rows) {
    CHECK(row.per_seed_final.size() == 1);
    CHECK(row.final_heldout_pass1.mean >= 0.0);
    CHECK(row.final_heldout_pass1.mean <= 1.0);
  }

  SearchParams sp;
  TrainParams tp;
  apply_evolution_variant("vanilla_q_outcome", sp, tp);
  CHECK(sp.backup_rule == BackupRule::vanilla);
  CHECK(tp.advantage_mode == AdvantageMode::outcome);
  CHECK(sp.selection_mode == SelectionMode::vanilla_uct);
  apply_evolution_variant("frontier_selection", sp, tp);
  CHECK(sp.backup_rule == BackupRule::constrained);
  CHECK(tp.advantage_mode == AdvantageMode::node_mean_only);
  CHECK(sp.selection_mode == SelectionMode::global_frontier);
  CHECK_THROWS_AS(apply_evolution_variant("nonsense", sp, tp), ConfigError);
}

TEST_CASE("student t tail probabilities match tabulated critical values") {
  // df = 4: one-sided 0.05 at t = 2.1318, 0.025 at t = 2.7764.
  CHECK(student_t_sf(2.1318, 4) == doctest::Approx(0.05).epsilon(2e-3));
  CHECK(student_t_sf(2.7764, 4) == doctest::Approx(0.025).epsilon(2e-3));
  CHECK(student_t_sf(0.0, 4) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(student_t_sf(-2.1318, 4) == doctest::Approx(0.95).epsilon(2e-3));

  const std::vector<double> a{3.0, 4.0, 5.0, 6.0, 7.0};
  const std::vector<double> b{1.0, 2.0, 3.0, 4.0, 5.0};
  const PairedTTest test = paired_t_test(a, b);
  CHECK(test.mean_difference == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(test.p_one_sided < 1e-6);  // constant difference, zero variance
}
