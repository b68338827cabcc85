#include "treerl/curriculum.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "treerl/names.hpp"
#include "treerl/rollout.hpp"

namespace treerl {

using json = nlohmann::ordered_json;

namespace {

// Tags for deterministic rng forking; arbitrary fixed constants.
constexpr std::uint64_t kTagInitialHard = 101;
constexpr std::uint64_t kTagHeldoutBase = 200;
constexpr std::uint64_t kTagIterationBase = 1000;
constexpr std::uint64_t kTagRefine = 17;
constexpr std::uint64_t kTagReplay = 29;

double mean_pass1(const EnvHandle& env, std::span<const Problem> problems,
                  const StepSampler& policy, int k, Rng rng) {
  if (problems.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    Rng sub = rng.fork(i);
    sum += pass1_at_k(env.vocab, problems[i], policy, env.verifier, k, sub,
                      env.max_steps, env.max_step_tokens);
  }
  return sum / static_cast<double>(problems.size());
}

}  // namespace

HardSet initial_hard_subset(const EnvHandle& env,
                            std::span<const Problem> dataset,
                            const StepSampler& policy, double delta0, int k,
                            Rng& rng) {
  if (dataset.empty()) throw ConfigError("initial_hard_subset: empty dataset");
  if (!(delta0 > 0.0 && delta0 < 1.0))
    throw ConfigError("initial_hard_subset: delta0 must be in (0,1)");
  HardSet hard;
  hard.iteration = 0;
  hard.delta = delta0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    Rng sub = rng.fork(i);
    const double rate = pass1_at_k(env.vocab, dataset[i], policy, env.verifier,
                                   k, sub, env.max_steps, env.max_step_tokens);
    if (rate < delta0) hard.ids.push_back(dataset[i].id);
  }
  return hard;
}

HardSet refine_hard_subset(const EnvHandle& env, const HardSet& hard,
                           const std::map<std::string, const Problem*>& by_id,
                           const StepSampler& policy, double delta, int k,
                           Rng& rng) {
  HardSet next;
  next.iteration = hard.iteration + 1;
  next.delta = delta;
  for (std::size_t i = 0; i < hard.ids.size(); ++i) {
    const auto it = by_id.find(hard.ids[i]);
    if (it == by_id.end())
      throw IntegrityError("refine_hard_subset: unknown problem id " + hard.ids[i]);
    Rng sub = rng.fork(i);
    const double rate = pass1_at_k(env.vocab, *it->second, policy, env.verifier,
                                   k, sub, env.max_steps, env.max_step_tokens);
    if (rate < delta) next.ids.push_back(hard.ids[i]);
  }
  return next;
}

void update_replay(const EnvHandle& env, ReplayBuffer& buffer,
                   const Problem& problem,
                   std::span<const Trajectory> search_trajectories,
                   const StepSampler& policy, double delta, int k, Rng& rng,
                   int iteration) {
  const Trajectory* first_correct = nullptr;
  for (const Trajectory& t : search_trajectories) {
    if (t.label == TrajLabel::correct) {
      first_correct = &t;
      break;
    }
  }
  if (!first_correct) return;
  const double rate = pass1_at_k(env.vocab, problem, policy, env.verifier, k,
                                 rng, env.max_steps, env.max_step_tokens);
  if (rate >= delta) return;  // solved often enough; nothing to preserve
  if (env.verifier(problem, first_correct->tokens) != 1)
    throw IntegrityError("update_replay: candidate trajectory fails verification for " +
                         problem.id);
  buffer.entries[problem.id] = ReplayEntry{*first_correct, iteration};
}

std::vector<Trajectory> hybrid_rollout(const EnvHandle& env,
                                       const Problem& problem,
                                       const ReplayBuffer& buffer,
                                       const StepSampler& policy,
                                       const SearchParams& search_params,
                                       double beta, int budget, Rng& rng,
                                       IterationCounters* counters,
                                       const QClip& qclip,
                                       const DegenerateFilterParams& filter) {
  if (!(beta > 0.0 && beta < 1.0))
    throw ContractViolation("hybrid_rollout: beta must be in (0,1)");
  std::vector<Trajectory> out;
  const auto it = buffer.entries.find(problem.id);
  if (it != buffer.entries.end()) {
    const Trajectory& cached = it->second.trajectory;
    if (env.verifier(problem, cached.tokens) != 1)
      throw IntegrityError("hybrid_rollout: stale cache entry for " + problem.id);
    if (counters) counters->cache_hits += 1;
    Trajectory replayed = cached;
    replayed.source = TrajSource::cached;
    out.push_back(std::move(replayed));
    const int extra = static_cast<int>(std::lround(beta * budget));
    auto direct = direct_rollouts(env.vocab, problem, policy, env.verifier,
                                  extra, rng, env.max_steps, env.max_step_tokens);
    if (counters) counters->terminals_sampled += static_cast<long>(direct.size());
    for (Trajectory& t : direct) {
      if (degenerate_filter(t, filter)) out.push_back(std::move(t));
    }
    return out;
  }

  if (counters) counters->full_mcts_invocations += 1;
  SearchResult result = run_search(problem, policy, env.verifier, search_params,
                                   env.vocab.ans_id(), rng, qclip, filter);
  if (counters)
    counters->terminals_sampled += static_cast<long>(result.tree.terminal_ids.size());
  return std::move(result.trajectories);
}

std::vector<Trajectory> build_training_set(
    std::span<const std::vector<Trajectory>> batch_results) {
  std::vector<Trajectory> out;
  for (const auto& group : batch_results)
    out.insert(out.end(), group.begin(), group.end());
  return out;
}

RunResult run_curriculum(std::span<const Problem> dataset,
                         const LinearPolicy& initial_policy,
                         const ExperimentConfig& config, Rng& rng,
                         const Checkpoint* resume) {
  config.validate();
  if (dataset.empty()) throw ConfigError("run_curriculum: empty dataset");
  const CurriculumConfig& cur = config.curriculum;
  const auto t_start = std::chrono::steady_clock::now();
  const auto out_of_time = [&] {
    if (!cur.wall_clock_budget_s) return false;
    const std::chrono::duration<double> elapsed =
        std::chrono::steady_clock::now() - t_start;
    return elapsed.count() > *cur.wall_clock_budget_s;
  };

  EnvHandle env{config.make_vocab(), Verifier{}, config.search.max_depth,
                config.search.max_step_tokens};
  env.verifier = exact_verifier(env.vocab);
  const QClip qclip{config.train.eps_q, config.train.q_max};
  const DegenerateFilterParams filter{1, 8, config.train.max_trajectory_tokens};

  // Train / held-out split: the tail of the dataset is reserved for
  // reporting and never trained on.
  const int heldout_size = static_cast<int>(
      std::lround(cur.heldout_fraction * static_cast<double>(dataset.size())));
  const std::size_t train_size = dataset.size() - static_cast<std::size_t>(heldout_size);
  const std::span<const Problem> train = dataset.subspan(0, train_size);
  const std::span<const Problem> heldout = dataset.subspan(train_size);

  std::map<std::string, const Problem*> by_id;
  for (const Problem& p : train) by_id[p.id] = &p;

  LinearPolicy policy = resume ? resume->policy : initial_policy;
  RunResult result{policy, {}, {}, {}, {}};
  RunReport& report = result.report;
  report.dataset_size = static_cast<int>(dataset.size());
  report.train_size = static_cast<int>(train_size);
  report.heldout_size = heldout_size;

  // Initially-hard held-out problems: the difficulty-matched panel used to
  // measure learning progress.
  const LinearPolicy eval0 = policy.with_temperature(cur.eval_temperature);
  std::vector<Problem> heldout_hard;
  {
    Rng eval_rng = rng.fork(kTagHeldoutBase);
    for (std::size_t i = 0; i < heldout.size(); ++i) {
      Rng sub = eval_rng.fork(i);
      const double rate = pass1_at_k(env.vocab, heldout[i], eval0, env.verifier,
                                     cur.pass_k, sub, env.max_steps,
                                     env.max_step_tokens);
      if (rate < cur.delta) heldout_hard.push_back(heldout[i]);
    }
  }
  report.heldout_hard_size = static_cast<int>(heldout_hard.size());
  report.initial_heldout_pass1 = mean_pass1(env, heldout, eval0, cur.pass_k,
                                            rng.fork(kTagHeldoutBase + 1));
  report.initial_heldout_hard_pass1 = mean_pass1(
      env, heldout_hard, eval0, cur.pass_k, rng.fork(kTagHeldoutBase + 2));

  HardSet hard;
  ReplayBuffer replay;
  int start_iteration = 0;
  if (resume) {
    hard = resume->hard;
    replay = resume->replay;
    start_iteration = resume->hard.iteration;
  } else {
    Rng hard_rng = rng.fork(kTagInitialHard);
    hard = initial_hard_subset(env, train, policy, cur.delta, cur.pass_k, hard_rng);
  }
  long step_counter = 0;
  report.halt_reason = "iterations";

  for (int iteration = start_iteration; iteration < cur.iterations; ++iteration) {
    if (hard.ids.empty()) {
      report.halt_reason = "hard_set_empty";
      break;
    }
    if (out_of_time()) {
      report.halt_reason = "wall_clock";
      break;
    }

    IterationReport iter_report;
    iter_report.iteration = iteration;
    iter_report.hard_set_size = static_cast<int>(hard.ids.size());
    IterationCounters& counters = iter_report.counters;
    Rng iter_rng = rng.fork(kTagIterationBase + static_cast<std::uint64_t>(iteration));

    // Correct search trajectories per problem, kept for the replay update
    // at iteration end.
    std::map<std::string, std::vector<Trajectory>> search_corrects;

    double objective_sum = 0.0;
    long steps_this_iteration = 0;
    std::size_t cursor = 0;
    long problems_processed = 0;
    while (cursor < hard.ids.size()) {
      if (out_of_time()) {
        report.halt_reason = "wall_clock";
        break;
      }
      const std::size_t batch_end =
          std::min(cursor + static_cast<std::size_t>(cur.batch_size), hard.ids.size());
      std::vector<std::vector<Trajectory>> batch_results;
      for (std::size_t i = cursor; i < batch_end; ++i) {
        const Problem& problem = *by_id.at(hard.ids[i]);
        Rng problem_rng = iter_rng.fork(i);
        std::vector<Trajectory> rollouts;
        if (cur.rollout_mode == RolloutMode::hybrid) {
          rollouts = hybrid_rollout(env, problem, replay, policy, config.search,
                                    cur.beta, cur.rollout_budget, problem_rng,
                                    &counters, qclip, filter);
        } else {
          auto direct = direct_rollouts(env.vocab, problem, policy, env.verifier,
                                        cur.flat_rollouts_per_problem, problem_rng,
                                        env.max_steps, env.max_step_tokens);
          counters.terminals_sampled += static_cast<long>(direct.size());
          for (Trajectory& t : direct)
            if (degenerate_filter(t, filter)) rollouts.push_back(std::move(t));
        }
        for (const Trajectory& t : rollouts) {
          if (t.source == TrajSource::mcts && t.label == TrajLabel::correct)
            search_corrects[problem.id].push_back(t);
        }
        batch_results.push_back(std::move(rollouts));
        ++problems_processed;
      }
      cursor = batch_end;

      std::vector<Trajectory> training_set = build_training_set(batch_results);
      for (Trajectory& t : training_set)
        t = apply_overlong_penalty(std::move(t), config.train.max_trajectory_tokens,
                                   config.train.overlong_penalty);
      counters.trajectories_trained += static_cast<long>(training_set.size());
      if (training_set.empty()) continue;

      const LinearPolicy old_policy = policy.snapshot();
      ObjectiveResult objective =
          tree_grpo_objective(training_set, policy, old_policy, config.train);
      policy = optimizer_step(policy, objective.gradient, config.train.learning_rate);

      ++step_counter;
      ++steps_this_iteration;
      objective_sum += objective.objective;
      result.metrics.push_back(StepMetrics{
          step_counter, objective.objective, objective.report.clip_fraction,
          objective.report.mean_ratio, objective.report.mean_advantage,
          static_cast<long>(training_set.size()), objective.report.token_count});
    }

    // Redundant-search identity: every processed problem either hit the
    // cache or ran one full search.
    if (cur.rollout_mode == RolloutMode::hybrid &&
        counters.full_mcts_invocations + counters.cache_hits != problems_processed)
      throw IntegrityError("curriculum: search/cache counter identity violated");

    // Replay updates with the post-update policy, then refilter within the
    // current hard set.
    const double delta_i =
        iteration < static_cast<int>(cur.delta_schedule.size())
            ? cur.delta_schedule[static_cast<std::size_t>(iteration)]
            : cur.delta;
    Rng replay_rng = iter_rng.fork(kTagReplay);
    std::size_t replay_index = 0;
    for (const std::string& id : hard.ids) {
      const auto found = search_corrects.find(id);
      if (found == search_corrects.end()) continue;
      Rng sub = replay_rng.fork(replay_index++);
      update_replay(env, replay, *by_id.at(id), found->second, policy, delta_i,
                    cur.pass_k, sub, iteration);
    }

    Rng refine_rng = iter_rng.fork(kTagRefine);
    HardSet next = refine_hard_subset(env, hard, by_id, policy, delta_i,
                                      cur.pass_k, refine_rng);
    // Nesting check (subset by construction; kept as a hard identity).
    {
      std::set<std::string> prev(hard.ids.begin(), hard.ids.end());
      for (const std::string& id : next.ids)
        if (!prev.contains(id))
          throw IntegrityError("curriculum: hard set is not nested at iteration " +
                               std::to_string(iteration));
    }
    hard = std::move(next);
    iter_report.hard_set_size_after = static_cast<int>(hard.ids.size());

    const LinearPolicy eval_policy = policy.with_temperature(cur.eval_temperature);
    iter_report.heldout_pass1 =
        mean_pass1(env, heldout, eval_policy, cur.pass_k,
                   rng.fork(kTagHeldoutBase + 10 + static_cast<std::uint64_t>(iteration)));
    iter_report.heldout_hard_pass1 =
        mean_pass1(env, heldout_hard, eval_policy, cur.pass_k,
                   rng.fork(kTagHeldoutBase + 500 + static_cast<std::uint64_t>(iteration)));
    iter_report.optimizer_steps = steps_this_iteration;
    iter_report.objective_mean =
        steps_this_iteration > 0 ? objective_sum / static_cast<double>(steps_this_iteration)
                                 : 0.0;
    report.iterations.push_back(iter_report);
    report.total_optimizer_steps += steps_this_iteration;
    report.total_trajectory_budget += counters.terminals_sampled;

    if (report.halt_reason == "wall_clock") break;
  }

  report.final_policy_version = policy.params().version;
  result.policy = std::move(policy);
  result.replay = std::move(replay);
  result.hard = std::move(hard);
  return result;
}

std::string report_to_json_text(const RunReport& report) {
  json doc;
  doc["format_version"] = 1;
  doc["dataset_size"] = report.dataset_size;
  doc["train_size"] = report.train_size;
  doc["heldout_size"] = report.heldout_size;
  doc["heldout_hard_size"] = report.heldout_hard_size;
  doc["initial"] = {{"heldout_pass1", report.initial_heldout_pass1},
                    {"heldout_hard_pass1", report.initial_heldout_hard_pass1}};
  json iterations = json::array();
  for (const IterationReport& it : report.iterations) {
    iterations.push_back(
        {{"iteration", it.iteration},
         {"hard_set_size", it.hard_set_size},
         {"hard_set_size_after", it.hard_set_size_after},
         {"heldout_pass1", it.heldout_pass1},
         {"heldout_hard_pass1", it.heldout_hard_pass1},
         {"objective_mean", it.objective_mean},
         {"optimizer_steps", it.optimizer_steps},
         {"counters",
          {{"full_mcts_invocations", it.counters.full_mcts_invocations},
           {"cache_hits", it.counters.cache_hits},
           {"trajectories_trained", it.counters.trajectories_trained},
           {"terminals_sampled", it.counters.terminals_sampled}}}});
  }
  doc["iterations"] = std::move(iterations);
  doc["totals"] = {{"optimizer_steps", report.total_optimizer_steps},
                   {"trajectory_budget", report.total_trajectory_budget}};
  doc["final_policy_version"] = report.final_policy_version;
  doc["halt_reason"] = report.halt_reason;
  return doc.dump(2);
}

std::string metrics_to_jsonl(std::span<const StepMetrics> metrics) {
  std::ostringstream out;
  for (const StepMetrics& m : metrics) {
    out << json{{"step", m.step},
                {"objective", m.objective},
                {"clip_fraction", m.clip_fraction},
                {"mean_ratio", m.mean_ratio},
                {"mean_advantage", m.mean_advantage},
                {"trajectories", m.trajectories},
                {"tokens", m.tokens}}
               .dump()
        << "\n";
  }
  return out.str();
}

namespace {

json trajectory_to_json(const Trajectory& t) {
  return json{{"problem",
               {{"id", t.problem.id},
                {"start_value", t.problem.start_value},
                {"target_value", t.problem.target_value},
                {"op_budget", t.problem.op_budget},
                {"difficulty", t.problem.difficulty}}},
              {"node_path", t.node_path},
              {"tokens", t.tokens},
              {"step_sizes", t.step_sizes},
              {"per_node_q", t.per_node_q},
              {"label", to_string(t.label)},
              {"source", to_string(t.source)},
              {"terminal_reward", t.terminal_reward}};
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  const json& p = j.at("problem");
  t.problem.id = p.at("id").get<std::string>();
  t.problem.start_value = p.at("start_value").get<std::int64_t>();
  t.problem.target_value = p.at("target_value").get<std::int64_t>();
  t.problem.op_budget = p.at("op_budget").get<int>();
  t.problem.difficulty = p.at("difficulty").get<int>();
  t.node_path = j.at("node_path").get<std::vector<NodeId>>();
  t.tokens = j.at("tokens").get<std::vector<Token>>();
  t.step_sizes = j.at("step_sizes").get<std::vector<int>>();
  t.per_node_q = j.at("per_node_q").get<std::vector<double>>();
  t.label = traj_label_from(j.at("label").get<std::string>());
  t.source = traj_source_from(j.at("source").get<std::string>());
  t.terminal_reward = j.at("terminal_reward").get<double>();
  return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const LinearPolicy& policy,
                     const ReplayBuffer& replay, const HardSet& hard) {
  const std::string policy_path = path + ".policy.json";
  save_policy(policy_path, policy);
  json doc;
  doc["format_version"] = 1;
  doc["policy_file"] = policy_path;
  doc["hard_set"] = {{"iteration", hard.iteration},
                     {"delta", hard.delta},
                     {"ids", hard.ids}};
  json entries = json::array();
  for (const auto& [id, entry] : replay.entries) {
    entries.push_back({{"problem_id", id},
                       {"inserted_iteration", entry.inserted_iteration},
                       {"trajectory", trajectory_to_json(entry.trajectory)}});
  }
  doc["replay"] = std::move(entries);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
  out << doc.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  const json doc = json::parse(in);
  if (doc.value("format_version", 0) != 1)
    throw ConfigError("unsupported checkpoint format_version in " + path);
  Checkpoint ck{load_policy(doc.at("policy_file").get<std::string>()), {}, {}};
  ck.hard.iteration = doc.at("hard_set").at("iteration").get<int>();
  ck.hard.delta = doc.at("hard_set").at("delta").get<double>();
  ck.hard.ids = doc.at("hard_set").at("ids").get<std::vector<std::string>>();
  for (const auto& rec : doc.at("replay")) {
    ReplayEntry entry{trajectory_from_json(rec.at("trajectory")),
                      rec.at("inserted_iteration").get<int>()};
    ck.replay.entries.emplace(rec.at("problem_id").get<std::string>(), std::move(entry));
  }
  return ck;
}

}  // namespace treerl
