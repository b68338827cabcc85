#include "treerl/environment.hpp"

#include <cstdlib>
#include <deque>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "treerl/trajectory.hpp"

namespace treerl {

using json = nlohmann::ordered_json;

EnvState initial_state(const Problem& problem) {
  EnvState s;
  s.value = problem.start_value;
  return s;
}

void advance(EnvState& state, const VocabularySpec& vocab, Token token) {
  if (!vocab.valid(token)) throw ContractViolation("advance: token out of vocabulary");
  if (!state.in_answer) {
    if (vocab.is_op(token)) {
      if (!state.overflowed) {
        const std::int64_t next = vocab.ops[static_cast<std::size_t>(token)].apply(state.value);
        if (next > kValueBound || next < -kValueBound) {
          state.overflowed = true;
        } else {
          state.value = next;
        }
      }
    } else if (token == vocab.sep_id()) {
      ++state.steps_completed;
    } else if (token == vocab.ans_id()) {
      state.in_answer = true;
      state.expected_answer = std::to_string(state.value);
    } else {
      state.malformed = true;  // answer tokens before the marker
    }
  } else {
    if (state.answer_closed) {
      state.malformed = true;
    } else if (token == vocab.sep_id()) {
      state.answer_closed = true;
    } else if (vocab.is_answer_token(token)) {
      state.declared += (token == vocab.minus_id())
                            ? '-'
                            : static_cast<char>('0' + vocab.digit_value(token));
    } else {
      state.malformed = true;  // ops or a second marker inside the answer
    }
  }
  state.last_token = token;
}

namespace {

// Strict decimal parse: optional minus, 1..7 digits, no leading zeros
// (a lone "0" is fine). Anything else is rejected.
std::optional<std::int64_t> parse_declared(const std::string& s) {
  std::size_t i = 0;
  bool negative = false;
  if (i < s.size() && s[i] == '-') {
    negative = true;
    ++i;
  }
  const std::size_t digits = s.size() - i;
  if (digits < 1 || digits > 7) return std::nullopt;
  if (digits > 1 && s[i] == '0') return std::nullopt;
  std::int64_t value = 0;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
    value = value * 10 + (s[i] - '0');
  }
  if (negative && value == 0) return std::nullopt;
  return negative ? -value : value;
}

}  // namespace

int verify(const VocabularySpec& vocab, const Problem& problem,
           std::span<const Token> trajectory_tokens) {
  EnvState state = initial_state(problem);
  for (Token t : trajectory_tokens) {
    if (!vocab.valid(t)) return 0;
    advance(state, vocab, t);
    if (state.malformed) return 0;
  }
  if (state.malformed || state.overflowed || !state.in_answer) return 0;
  const auto declared = parse_declared(state.declared);
  if (!declared) return 0;
  return (*declared == state.value && state.value == problem.target_value) ? 1 : 0;
}

std::optional<int> min_op_distance(const VocabularySpec& vocab,
                                   std::int64_t start, std::int64_t target,
                                   int max_ops) {
  if (start == target) return 0;
  std::unordered_set<std::int64_t> seen{start};
  std::vector<std::int64_t> frontier{start};
  for (int depth = 1; depth <= max_ops; ++depth) {
    std::vector<std::int64_t> next;
    for (std::int64_t v : frontier) {
      for (const StepOp& op : vocab.ops) {
        const std::int64_t w = op.apply(v);
        if (w > kValueBound || w < -kValueBound) continue;
        if (w == target) return depth;
        if (seen.insert(w).second) next.push_back(w);
      }
    }
    frontier = std::move(next);
    if (frontier.empty()) break;
  }
  return std::nullopt;
}

std::optional<std::vector<Token>> solve_min_ops(const VocabularySpec& vocab,
                                                const Problem& problem,
                                                int max_ops) {
  if (problem.start_value == problem.target_value) return std::vector<Token>{};
  struct Link {
    std::int64_t prev;
    Token op;
  };
  std::unordered_map<std::int64_t, Link> back{{problem.start_value, {0, -1}}};
  std::vector<std::int64_t> frontier{problem.start_value};
  for (int depth = 1; depth <= max_ops; ++depth) {
    std::vector<std::int64_t> next;
    for (std::int64_t v : frontier) {
      for (std::size_t j = 0; j < vocab.ops.size(); ++j) {
        const std::int64_t w = vocab.ops[j].apply(v);
        if (w > kValueBound || w < -kValueBound) continue;
        if (back.contains(w)) continue;
        back.emplace(w, Link{v, static_cast<Token>(j)});
        if (w == problem.target_value) {
          std::vector<Token> tokens;
          std::int64_t cur = w;
          while (cur != problem.start_value) {
            const Link& link = back.at(cur);
            tokens.push_back(link.op);
            cur = link.prev;
          }
          std::reverse(tokens.begin(), tokens.end());
          return tokens;
        }
        next.push_back(w);
      }
    }
    frontier = std::move(next);
    if (frontier.empty()) break;
  }
  return std::nullopt;
}

std::vector<Token> canonical_solution(const VocabularySpec& vocab,
                                      std::span<const Token> op_tokens,
                                      std::int64_t answer) {
  std::vector<Token> tokens;
  for (Token op : op_tokens) {
    tokens.push_back(op);
    tokens.push_back(vocab.sep_id());
  }
  tokens.push_back(vocab.ans_id());
  for (char c : std::to_string(answer)) {
    tokens.push_back(c == '-' ? vocab.minus_id() : vocab.digit_id(c - '0'));
  }
  return tokens;
}

std::vector<Problem> generate_dataset(const VocabularySpec& vocab,
                                      const DatasetSpec& spec,
                                      std::uint64_t seed) {
  if (spec.count < 1) throw ConfigError("dataset.count must be >= 1");
  if (spec.difficulty_min < 1 || spec.difficulty_max < spec.difficulty_min)
    throw ConfigError("dataset difficulty range is empty");

  Rng rng = Rng(seed).fork(0x9a7a5e7);
  std::vector<Problem> problems;
  problems.reserve(static_cast<std::size_t>(spec.count));
  for (int index = 0; index < spec.count; ++index) {
    const int difficulty = static_cast<int>(
        rng.uniform_int(spec.difficulty_min, spec.difficulty_max));
    Problem p;
    p.difficulty = difficulty;
    p.op_budget = difficulty + 2;
    p.id = "p" + std::to_string(index);
    // Rejection-sample generating op sequences until the sampled length is
    // actually minimal for (start, target).
    for (;;) {
      p.start_value = rng.uniform_int(-spec.start_range, spec.start_range);
      std::int64_t value = p.start_value;
      bool bounded = true;
      for (int step = 0; step < difficulty; ++step) {
        const auto op_index = rng.uniform_int(0, static_cast<std::int64_t>(vocab.ops.size()) - 1);
        value = vocab.ops[static_cast<std::size_t>(op_index)].apply(value);
        if (value > kValueBound || value < -kValueBound) {
          bounded = false;
          break;
        }
      }
      if (!bounded) continue;
      const auto dist = min_op_distance(vocab, p.start_value, value, difficulty);
      if (dist && *dist == difficulty) {
        p.target_value = value;
        break;
      }
    }
    problems.push_back(std::move(p));
  }
  return problems;
}

void save_dataset(const std::string& path, std::span<const Problem> problems) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open dataset file for writing: " + path);
  out << json{{"format_version", 1}, {"type", "dataset"}}.dump() << "\n";
  for (const Problem& p : problems) {
    out << json{{"id", p.id},
                {"start_value", p.start_value},
                {"target_value", p.target_value},
                {"op_budget", p.op_budget},
                {"difficulty", p.difficulty}}
               .dump()
        << "\n";
  }
}

std::vector<Problem> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset file is empty: " + path);
  const json header = json::parse(line);
  if (header.value("format_version", 0) != 1)
    throw ConfigError("unsupported dataset format_version in " + path);
  std::vector<Problem> problems;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    Problem p;
    p.id = rec.at("id").get<std::string>();
    p.start_value = rec.at("start_value").get<std::int64_t>();
    p.target_value = rec.at("target_value").get<std::int64_t>();
    p.op_budget = rec.at("op_budget").get<int>();
    p.difficulty = rec.at("difficulty").get<int>();
    problems.push_back(std::move(p));
  }
  return problems;
}

bool degenerate_filter(const Trajectory& trajectory,
                       const DegenerateFilterParams& params) {
  if (trajectory.label == TrajLabel::correct) return true;
  const auto& tokens = trajectory.tokens;
  const int n = static_cast<int>(tokens.size());
  if (n > params.max_tokens) return false;
  const int max_block = n / params.min_repeats;
  for (int block = params.min_block; block <= max_block; ++block) {
    int matched = 0;  // consecutive positions where tokens[i] == tokens[i - block]
    for (int i = block; i < n; ++i) {
      matched = (tokens[static_cast<std::size_t>(i)] ==
                 tokens[static_cast<std::size_t>(i - block)])
                    ? matched + 1
                    : 0;
      // block repeated r times <=> (r - 1) * block consecutive matches
      if (matched >= (params.min_repeats - 1) * block) return false;
    }
  }
  return true;
}

}  // namespace treerl
