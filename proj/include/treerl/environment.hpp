#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treerl/common.hpp"
#include "treerl/vocab.hpp"

namespace treerl {

/// Running values are kept inside this bound; anything beyond fails verification.
inline constexpr std::int64_t kValueBound = 1'000'000;

/**
 * One arithmetic-chain task: transform start_value into target_value by a
 * sequence of vocabulary ops, then declare the result in decimal.
 * A solution of exactly `difficulty` ops exists and none shorter does.
 */
struct Problem {
  std::string id;
  std::int64_t start_value = 0;
  std::int64_t target_value = 0;
  int op_budget = 0;    // step allowance the problem was sized for
  int difficulty = 0;   // minimal number of ops, by construction
};

/**
 * Token-level automaton over a trajectory. Tracks the running value, the
 * ops/answer phase split, and the canonical spelling of the value at the
 * moment the answer marker was emitted. `malformed` latches on any
 * out-of-grammar token; verification maps it to 0.
 */
struct EnvState {
  std::int64_t value = 0;
  bool in_answer = false;
  bool answer_closed = false;
  bool malformed = false;
  bool overflowed = false;
  int steps_completed = 0;       // sep tokens consumed
  std::string expected_answer;   // canonical digits of `value` at marker time
  std::string declared;          // answer tokens actually emitted
  Token last_token = -1;         // -1: nothing consumed yet
};

EnvState initial_state(const Problem& problem);
void advance(EnvState& state, const VocabularySpec& vocab, Token token);

/// 1 iff the token sequence is a well-formed solution of `problem`, else 0.
/// Malformed input is an ordinary 0, never an error.
int verify(const VocabularySpec& vocab, const Problem& problem,
           std::span<const Token> trajectory_tokens);

/// Shortest op-token sequence from start to target (breadth-first), if one
/// exists within `max_ops` applications. Test/tooling helper.
std::optional<std::vector<Token>> solve_min_ops(const VocabularySpec& vocab,
                                                const Problem& problem,
                                                int max_ops);

/// Minimal op count from `start` to `target`, or nullopt if unreachable
/// within max_ops.
std::optional<int> min_op_distance(const VocabularySpec& vocab,
                                   std::int64_t start, std::int64_t target,
                                   int max_ops);

/// Canonical full solution token sequence: one op per step, then the answer.
std::vector<Token> canonical_solution(const VocabularySpec& vocab,
                                      std::span<const Token> op_tokens,
                                      std::int64_t answer);

struct DatasetSpec {
  int count = 1000;
  int difficulty_min = 1;
  int difficulty_max = 3;
  std::int64_t start_range = 20;  // start_value drawn from [-range, range]
};

/// Deterministic for a fixed seed. Each problem's difficulty equals the
/// minimal solving op count (shorter solutions are rejected and resampled).
std::vector<Problem> generate_dataset(const VocabularySpec& vocab,
                                      const DatasetSpec& spec,
                                      std::uint64_t seed);

/// Line-delimited problem records with a leading format-version header line.
void save_dataset(const std::string& path, std::span<const Problem> problems);
std::vector<Problem> load_dataset(const std::string& path);

}  // namespace treerl
