#include "treerl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "treerl/names.hpp"

namespace treerl {

using json = nlohmann::ordered_json;

VocabularySpec ExperimentConfig::make_vocab() const {
  if (environment.vocab == "standard") return VocabularySpec::standard();
  if (environment.vocab == "compact") return VocabularySpec::compact();
  throw ConfigError("environment.vocab must be \"standard\" or \"compact\", got \"" +
                    environment.vocab + "\"");
}

LinearPolicy ExperimentConfig::make_initial_policy() const {
  if (initial_policy.kind == "zero") return LinearPolicy(make_vocab());
  if (initial_policy.kind == "heuristic")
    return heuristic_policy(make_vocab(), initial_policy.strength);
  if (initial_policy.kind == "file") {
    if (!initial_policy.file)
      throw ConfigError("initial_policy.file is required when kind is \"file\"");
    return load_policy(*initial_policy.file);
  }
  throw ConfigError(
      "initial_policy.kind must be \"heuristic\", \"zero\" or \"file\", got \"" +
      initial_policy.kind + "\"");
}

void ExperimentConfig::validate(bool require_seed_and_out) const {
  std::vector<std::string> problems;
  auto collect = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
  };
  if (require_seed_and_out) {
    if (!seed) problems.push_back("seed is missing (config field \"seed\" or --seed)");
    if (!out_dir) problems.push_back("output directory is missing (config field \"out_dir\" or --out)");
  }
  collect([&] { (void)make_vocab(); });
  collect([&] { search.validate(); });
  collect([&] { train.validate(); });
  if (initial_policy.kind != "heuristic" && initial_policy.kind != "zero" &&
      initial_policy.kind != "file")
    problems.push_back("initial_policy.kind must be \"heuristic\", \"zero\" or \"file\"");
  if (initial_policy.kind == "file" && !initial_policy.file)
    problems.push_back("initial_policy.file is required when kind is \"file\"");
  if (initial_policy.strength < 0.0)
    problems.push_back("initial_policy.strength must be >= 0");
  if (environment.dataset.count < 1) problems.push_back("environment.dataset.count must be >= 1");
  if (environment.dataset.difficulty_min < 1 ||
      environment.dataset.difficulty_max < environment.dataset.difficulty_min)
    problems.push_back("environment.dataset difficulty range is empty");
  if (environment.dataset.start_range < 0)
    problems.push_back("environment.dataset.start_range must be >= 0");
  const CurriculumConfig& c = curriculum;
  if (c.iterations < 0) problems.push_back("curriculum.iterations must be >= 0");
  if (c.batch_size < 1) problems.push_back("curriculum.batch_size must be >= 1");
  if (!(c.delta > 0.0 && c.delta < 1.0))
    problems.push_back("curriculum.delta must be in (0,1)");
  for (double d : c.delta_schedule)
    if (!(d > 0.0 && d < 1.0))
      problems.push_back("curriculum.delta_schedule entries must be in (0,1)");
  if (c.pass_k < 1) problems.push_back("curriculum.pass_k must be >= 1");
  if (!(c.beta > 0.0 && c.beta < 1.0)) problems.push_back("curriculum.beta must be in (0,1)");
  if (c.rollout_budget < 1) problems.push_back("curriculum.rollout_budget must be >= 1");
  if (!(c.heldout_fraction >= 0.0 && c.heldout_fraction < 1.0))
    problems.push_back("curriculum.heldout_fraction must be in [0,1)");
  if (!(c.eval_temperature > 0.0))
    problems.push_back("curriculum.eval_temperature must be > 0");
  if (c.wall_clock_budget_s && !(*c.wall_clock_budget_s > 0.0))
    problems.push_back("curriculum.wall_clock_budget_s must be > 0 when set");
  if (c.flat_rollouts_per_problem < 1)
    problems.push_back("curriculum.flat_rollouts_per_problem must be >= 1");

  if (!problems.empty()) {
    std::string joined;
    for (const std::string& p : problems) joined += (joined.empty() ? "" : "; ") + p;
    throw ConfigError(joined);
  }
}

namespace {

// Rejects unknown keys so config typos fail loudly instead of silently
// falling back to defaults.
void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& known,
                std::vector<std::string>& problems) {
  for (const auto& item : j.items()) {
    if (!known.contains(item.key()))
      problems.push_back("unknown config field: " + where + item.key());
  }
}

template <typename T>
void read(const json& j, const std::string& where, const char* key, T& out,
          std::vector<std::string>& problems) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    problems.push_back("config field has the wrong type: " + where + key);
  }
}

void read_enum(const json& j, const std::string& where, const char* key,
               auto parser, auto& out, std::vector<std::string>& problems) {
  if (!j.contains(key)) return;
  try {
    out = parser(j.at(key).get<std::string>());
  } catch (const std::exception& e) {
    problems.push_back(where + std::string(key) + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  const json doc = json::parse(text);
  std::vector<std::string> problems;
  ExperimentConfig config;

  check_keys(doc, "",
             {"format_version", "seed", "out_dir", "environment",
              "initial_policy", "search", "train", "curriculum", "ablation"},
             problems);
  if (doc.contains("format_version") && doc.at("format_version").get<int>() != 1)
    problems.push_back("unsupported config format_version");
  if (doc.contains("seed")) config.seed = doc.at("seed").get<std::uint64_t>();
  if (doc.contains("out_dir")) config.out_dir = doc.at("out_dir").get<std::string>();

  if (doc.contains("environment")) {
    const json& e = doc.at("environment");
    check_keys(e, "environment.", {"vocab", "dataset", "dataset_file"}, problems);
    read(e, "environment.", "vocab", config.environment.vocab, problems);
    if (e.contains("dataset_file"))
      config.environment.dataset_file = e.at("dataset_file").get<std::string>();
    if (e.contains("dataset")) {
      const json& d = e.at("dataset");
      check_keys(d, "environment.dataset.",
                 {"count", "difficulty_min", "difficulty_max", "start_range"},
                 problems);
      read(d, "environment.dataset.", "count", config.environment.dataset.count, problems);
      read(d, "environment.dataset.", "difficulty_min",
           config.environment.dataset.difficulty_min, problems);
      read(d, "environment.dataset.", "difficulty_max",
           config.environment.dataset.difficulty_max, problems);
      read(d, "environment.dataset.", "start_range",
           config.environment.dataset.start_range, problems);
    }
  }

  if (doc.contains("initial_policy")) {
    const json& ip = doc.at("initial_policy");
    check_keys(ip, "initial_policy.", {"kind", "strength", "file"}, problems);
    read(ip, "initial_policy.", "kind", config.initial_policy.kind, problems);
    read(ip, "initial_policy.", "strength", config.initial_policy.strength, problems);
    if (ip.contains("file"))
      config.initial_policy.file = ip.at("file").get<std::string>();
  }

  if (doc.contains("search")) {
    const json& s = doc.at("search");
    SearchParams& p = config.search;
    check_keys(s, "search.",
               {"max_depth", "expansion_width", "max_rollouts", "uct_lambda",
                "lambda1", "lambda2", "lambda3", "depth_bonus", "gamma_min",
                "selection_mode", "backup_rule", "early_stop_correct",
                "max_step_tokens", "max_nodes", "max_extracted_negatives"},
               problems);
    read(s, "search.", "max_depth", p.max_depth, problems);
    read(s, "search.", "expansion_width", p.expansion_width, problems);
    read(s, "search.", "max_rollouts", p.max_rollouts, problems);
    read(s, "search.", "uct_lambda", p.uct_lambda, problems);
    read(s, "search.", "lambda1", p.lambda1, problems);
    read(s, "search.", "lambda2", p.lambda2, problems);
    read(s, "search.", "lambda3", p.lambda3, problems);
    read_enum(s, "search.", "depth_bonus", depth_bonus_from, p.depth_bonus_kind, problems);
    read(s, "search.", "gamma_min", p.gamma_min, problems);
    read_enum(s, "search.", "selection_mode", selection_mode_from, p.selection_mode, problems);
    read_enum(s, "search.", "backup_rule", backup_rule_from, p.backup_rule, problems);
    if (s.contains("early_stop_correct") && !s.at("early_stop_correct").is_null())
      p.early_stop_correct = s.at("early_stop_correct").get<int>();
    read(s, "search.", "max_step_tokens", p.max_step_tokens, problems);
    read(s, "search.", "max_nodes", p.max_nodes, problems);
    read(s, "search.", "max_extracted_negatives", p.max_extracted_negatives, problems);
  }

  if (doc.contains("train")) {
    const json& t = doc.at("train");
    TrainParams& p = config.train;
    check_keys(t, "train.",
               {"eps_q", "q_max", "eps_low", "eps_high", "advantage_mode",
                "sigma_floor", "learning_rate", "max_trajectory_tokens",
                "overlong_penalty", "loss_aggregation"},
               problems);
    read(t, "train.", "eps_q", p.eps_q, problems);
    read(t, "train.", "q_max", p.q_max, problems);
    read(t, "train.", "eps_low", p.eps_low, problems);
    read(t, "train.", "eps_high", p.eps_high, problems);
    read_enum(t, "train.", "advantage_mode", advantage_mode_from, p.advantage_mode, problems);
    read(t, "train.", "sigma_floor", p.sigma_floor, problems);
    read(t, "train.", "learning_rate", p.learning_rate, problems);
    read(t, "train.", "max_trajectory_tokens", p.max_trajectory_tokens, problems);
    read(t, "train.", "overlong_penalty", p.overlong_penalty, problems);
    read_enum(t, "train.", "loss_aggregation", loss_aggregation_from, p.loss_aggregation, problems);
  }

  if (doc.contains("curriculum")) {
    const json& c = doc.at("curriculum");
    CurriculumConfig& p = config.curriculum;
    check_keys(c, "curriculum.",
               {"iterations", "batch_size", "delta", "delta_schedule", "pass_k",
                "beta", "rollout_budget", "heldout_fraction", "eval_temperature",
                "wall_clock_budget_s", "rollout_mode", "flat_rollouts_per_problem"},
               problems);
    read(c, "curriculum.", "iterations", p.iterations, problems);
    read(c, "curriculum.", "batch_size", p.batch_size, problems);
    read(c, "curriculum.", "delta", p.delta, problems);
    read(c, "curriculum.", "delta_schedule", p.delta_schedule, problems);
    read(c, "curriculum.", "pass_k", p.pass_k, problems);
    read(c, "curriculum.", "beta", p.beta, problems);
    read(c, "curriculum.", "rollout_budget", p.rollout_budget, problems);
    read(c, "curriculum.", "heldout_fraction", p.heldout_fraction, problems);
    read(c, "curriculum.", "eval_temperature", p.eval_temperature, problems);
    if (c.contains("wall_clock_budget_s") && !c.at("wall_clock_budget_s").is_null())
      p.wall_clock_budget_s = c.at("wall_clock_budget_s").get<double>();
    if (c.contains("rollout_mode")) {
      const std::string mode = c.at("rollout_mode").get<std::string>();
      if (mode == "hybrid") p.rollout_mode = RolloutMode::hybrid;
      else if (mode == "flat") p.rollout_mode = RolloutMode::flat;
      else problems.push_back("curriculum.rollout_mode must be \"hybrid\" or \"flat\"");
    }
    read(c, "curriculum.", "flat_rollouts_per_problem", p.flat_rollouts_per_problem, problems);
  }

  if (doc.contains("ablation")) {
    const json& a = doc.at("ablation");
    AblationSpec& p = config.ablation;
    check_keys(a, "ablation.",
               {"search_variants", "evolution_variants", "problem_count",
                "difficulty_min", "difficulty_max", "start_range", "seeds",
                "policy_file", "warmup_problems", "warmup_iterations"},
               problems);
    read(a, "ablation.", "search_variants", p.search_variants, problems);
    read(a, "ablation.", "evolution_variants", p.evolution_variants, problems);
    read(a, "ablation.", "problem_count", p.problem_count, problems);
    read(a, "ablation.", "difficulty_min", p.difficulty_min, problems);
    read(a, "ablation.", "difficulty_max", p.difficulty_max, problems);
    read(a, "ablation.", "start_range", p.start_range, problems);
    read(a, "ablation.", "seeds", p.seeds, problems);
    if (a.contains("policy_file"))
      p.policy_file = a.at("policy_file").get<std::string>();
    read(a, "ablation.", "warmup_problems", p.warmup_problems, problems);
    read(a, "ablation.", "warmup_iterations", p.warmup_iterations, problems);
  }

  if (!problems.empty()) {
    std::string joined;
    for (const std::string& p : problems) joined += (joined.empty() ? "" : "; ") + p;
    throw ConfigError(joined);
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json_text(buffer.str());
}

std::string config_to_json_text(const ExperimentConfig& config) {
  json doc;
  doc["format_version"] = 1;
  if (config.seed) doc["seed"] = *config.seed;
  if (config.out_dir) doc["out_dir"] = *config.out_dir;

  json e;
  e["vocab"] = config.environment.vocab;
  if (config.environment.dataset_file) e["dataset_file"] = *config.environment.dataset_file;
  e["dataset"] = {{"count", config.environment.dataset.count},
                  {"difficulty_min", config.environment.dataset.difficulty_min},
                  {"difficulty_max", config.environment.dataset.difficulty_max},
                  {"start_range", config.environment.dataset.start_range}};
  doc["environment"] = std::move(e);

  json ip;
  ip["kind"] = config.initial_policy.kind;
  ip["strength"] = config.initial_policy.strength;
  if (config.initial_policy.file) ip["file"] = *config.initial_policy.file;
  doc["initial_policy"] = std::move(ip);

  const SearchParams& s = config.search;
  json sj;
  sj["max_depth"] = s.max_depth;
  sj["expansion_width"] = s.expansion_width;
  sj["max_rollouts"] = s.max_rollouts;
  sj["uct_lambda"] = s.uct_lambda;
  sj["lambda1"] = s.lambda1;
  sj["lambda2"] = s.lambda2;
  sj["lambda3"] = s.lambda3;
  sj["depth_bonus"] = to_string(s.depth_bonus_kind);
  sj["gamma_min"] = s.gamma_min;
  sj["selection_mode"] = to_string(s.selection_mode);
  sj["backup_rule"] = to_string(s.backup_rule);
  sj["early_stop_correct"] = s.early_stop_correct ? json(*s.early_stop_correct) : json(nullptr);
  sj["max_step_tokens"] = s.max_step_tokens;
  sj["max_nodes"] = s.max_nodes;
  sj["max_extracted_negatives"] = s.max_extracted_negatives;
  doc["search"] = std::move(sj);

  const TrainParams& t = config.train;
  json tj;
  tj["eps_q"] = t.eps_q;
  tj["q_max"] = t.q_max;
  tj["eps_low"] = t.eps_low;
  tj["eps_high"] = t.eps_high;
  tj["advantage_mode"] = to_string(t.advantage_mode);
  tj["sigma_floor"] = t.sigma_floor;
  tj["learning_rate"] = t.learning_rate;
  tj["max_trajectory_tokens"] = t.max_trajectory_tokens;
  tj["overlong_penalty"] = t.overlong_penalty;
  tj["loss_aggregation"] = to_string(t.loss_aggregation);
  doc["train"] = std::move(tj);

  const CurriculumConfig& c = config.curriculum;
  json cj;
  cj["iterations"] = c.iterations;
  cj["batch_size"] = c.batch_size;
  cj["delta"] = c.delta;
  cj["delta_schedule"] = c.delta_schedule;
  cj["pass_k"] = c.pass_k;
  cj["beta"] = c.beta;
  cj["rollout_budget"] = c.rollout_budget;
  cj["heldout_fraction"] = c.heldout_fraction;
  cj["eval_temperature"] = c.eval_temperature;
  cj["wall_clock_budget_s"] = c.wall_clock_budget_s ? json(*c.wall_clock_budget_s) : json(nullptr);
  cj["rollout_mode"] = c.rollout_mode == RolloutMode::hybrid ? "hybrid" : "flat";
  cj["flat_rollouts_per_problem"] = c.flat_rollouts_per_problem;
  doc["curriculum"] = std::move(cj);

  const AblationSpec& a = config.ablation;
  json aj;
  aj["search_variants"] = a.search_variants;
  aj["evolution_variants"] = a.evolution_variants;
  aj["problem_count"] = a.problem_count;
  aj["difficulty_min"] = a.difficulty_min;
  aj["difficulty_max"] = a.difficulty_max;
  aj["start_range"] = a.start_range;
  aj["seeds"] = a.seeds;
  if (a.policy_file) aj["policy_file"] = *a.policy_file;
  aj["warmup_problems"] = a.warmup_problems;
  aj["warmup_iterations"] = a.warmup_iterations;
  doc["ablation"] = std::move(aj);
  return doc.dump(2);
}

void save_config(const std::string& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open config file for writing: " + path);
  out << config_to_json_text(config) << "\n";
}

}  // namespace treerl
