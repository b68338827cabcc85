#include <doctest.h>

#include <map>
#include <set>

#include "treerl/environment.hpp"
#include "treerl/rollout.hpp"
#include "treerl/trajectory.hpp"

#include "test_support.hpp"

using namespace treerl;
using namespace treerl::testing;

TEST_CASE("vocabulary layout and names") {
  const VocabularySpec standard = VocabularySpec::standard();
  CHECK(standard.size() == 26);
  const VocabularySpec compact = VocabularySpec::compact();
  CHECK(compact.size() == 16);
  for (Token t = 0; t < standard.size(); ++t)
    CHECK(standard.token_id(standard.token_name(t)) == t);
  CHECK(standard.is_op(0));
  CHECK(!standard.is_op(standard.sep_id()));
  CHECK(standard.is_digit(standard.digit_id(9)));
  CHECK(standard.digit_value(standard.digit_id(7)) == 7);
}

TEST_CASE("verify accepts the generating sequence and rejects mutations") {
  const VocabularySpec vocab = VocabularySpec::standard();
  const Token add2 = vocab.token_id("add_2");
  const Problem p = make_problem(5, 7);

  CHECK(verify(vocab, p, std::vector<Token>{}) == 0);  // no answer marker

  const auto good = canonical_solution(vocab, std::vector<Token>{add2}, 7);
  CHECK(verify(vocab, p, good) == 1);

  const auto off_by_one = canonical_solution(vocab, std::vector<Token>{add2}, 8);
  CHECK(verify(vocab, p, off_by_one) == 0);

  // Declared answer must match the computed value even when it matches the
  // target: declaring 7 after computing 8 fails.
  const Token add3 = vocab.token_id("add_3");
  std::vector<Token> lied{add3, vocab.sep_id(), vocab.ans_id(), vocab.digit_id(7)};
  CHECK(verify(vocab, p, lied) == 0);
}

TEST_CASE("verify rejects malformed token sequences") {
  const VocabularySpec vocab = VocabularySpec::standard();
  const Problem p = make_problem(5, 7);
  const Token add2 = vocab.token_id("add_2");

  SUBCASE("digits before the marker") {
    CHECK(verify(vocab, p, std::vector<Token>{vocab.digit_id(7), vocab.ans_id()}) == 0);
  }
  SUBCASE("ops after the marker") {
    CHECK(verify(vocab, p,
                 std::vector<Token>{add2, vocab.ans_id(), add2, vocab.digit_id(7)}) == 0);
  }
  SUBCASE("double marker") {
    CHECK(verify(vocab, p,
                 std::vector<Token>{add2, vocab.ans_id(), vocab.ans_id(),
                                    vocab.digit_id(7)}) == 0);
  }
  SUBCASE("empty answer") {
    CHECK(verify(vocab, p, std::vector<Token>{add2, vocab.ans_id()}) == 0);
  }
  SUBCASE("leading zeros") {
    CHECK(verify(vocab, p,
                 std::vector<Token>{add2, vocab.ans_id(), vocab.digit_id(0),
                                    vocab.digit_id(7)}) == 0);
  }
  SUBCASE("trailing separator is fine") {
    std::vector<Token> ok{add2, vocab.ans_id(), vocab.digit_id(7), vocab.sep_id()};
    CHECK(verify(vocab, p, ok) == 1);
  }
}

TEST_CASE("verify is pure and bounded") {
  const VocabularySpec vocab = VocabularySpec::standard();
  const Token mul3 = vocab.token_id("mul_3");
  // 20 * 3^13 > 1e6: overflow maps to 0 even with a "correct" declaration.
  Problem p = make_problem(20, 0);
  std::vector<Token> tokens;
  for (int i = 0; i < 13; ++i) tokens.push_back(mul3);
  tokens.push_back(vocab.ans_id());
  tokens.push_back(vocab.digit_id(0));
  CHECK(verify(vocab, p, tokens) == 0);
  CHECK(verify(vocab, p, tokens) == 0);  // identical inputs, identical result
}

TEST_CASE("generate_dataset is deterministic and difficulty-sound") {
  const VocabularySpec vocab = VocabularySpec::standard();
  DatasetSpec spec;
  spec.count = 1;
  spec.difficulty_min = 1;
  spec.difficulty_max = 1;
  const auto one = generate_dataset(vocab, spec, 0);
  REQUIRE(one.size() == 1);
  CHECK(one[0].difficulty == 1);
  const auto dist = min_op_distance(vocab, one[0].start_value, one[0].target_value, 4);
  REQUIRE(dist.has_value());
  CHECK(*dist == 1);

  spec.count = 50;
  spec.difficulty_max = 3;
  const auto a = generate_dataset(vocab, spec, 7);
  const auto b = generate_dataset(vocab, spec, 7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].start_value == b[i].start_value);
    CHECK(a[i].target_value == b[i].target_value);
    CHECK(a[i].difficulty == b[i].difficulty);
  }

  CHECK_THROWS_AS(generate_dataset(vocab, DatasetSpec{0, 1, 1, 20}, 0), ConfigError);
  CHECK_THROWS_AS(generate_dataset(vocab, DatasetSpec{1, 3, 2, 20}, 0), ConfigError);
}

TEST_CASE("every generated problem is solvable at its recorded difficulty") {
  // Generator-replay oracle: re-derive a shortest solution independently and
  // verify it end to end.
  const VocabularySpec vocab = VocabularySpec::standard();
  DatasetSpec spec;
  spec.count = 1000;
  spec.difficulty_min = 1;
  spec.difficulty_max = 3;
  const auto problems = generate_dataset(vocab, spec, 11);
  for (const Problem& p : problems) {
    const auto ops = solve_min_ops(vocab, p, p.difficulty);
    REQUIRE_MESSAGE(ops.has_value(), p.id);
    CHECK(static_cast<int>(ops->size()) == p.difficulty);
    CHECK(p.difficulty <= p.op_budget);
    const auto tokens = canonical_solution(vocab, *ops, p.target_value);
    CHECK(verify(vocab, p, tokens) == 1);
  }
}

TEST_CASE("dataset file round-trip") {
  const VocabularySpec vocab = VocabularySpec::standard();
  DatasetSpec spec;
  spec.count = 20;
  const auto problems = generate_dataset(vocab, spec, 3);
  const std::string path = "test_dataset_tmp.jsonl";
  save_dataset(path, problems);
  const auto loaded = load_dataset(path);
  REQUIRE(loaded.size() == problems.size());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    CHECK(loaded[i].id == problems[i].id);
    CHECK(loaded[i].start_value == problems[i].start_value);
    CHECK(loaded[i].target_value == problems[i].target_value);
    CHECK(loaded[i].op_budget == problems[i].op_budget);
    CHECK(loaded[i].difficulty == problems[i].difficulty);
  }
  std::remove(path.c_str());
}

TEST_CASE("pass1_at_k endpoints") {
  const VocabularySpec vocab = VocabularySpec::standard();
  const Verifier verifier = exact_verifier(vocab);
  const Problem p = make_problem(5, 7);
  Rng rng(1);

  const OracleSampler oracle(vocab);
  CHECK(pass1_at_k(vocab, p, oracle, verifier, 4, rng) == 1.0);

  const WrongAnswerSampler wrong(vocab);
  CHECK(pass1_at_k(vocab, p, wrong, verifier, 4, rng) == 0.0);
}

TEST_CASE("pass1_at_k counts fractional successes") {
  // One success out of K=4 gives exactly 0.25.
  const VocabularySpec vocab = VocabularySpec::standard();
  const Verifier verifier = exact_verifier(vocab);
  const Problem p = make_problem(5, 7);

  struct OneInFour : StepSampler {
    VocabularySpec vocab;
    mutable int rollout = -1;
    OracleSampler oracle;
    WrongAnswerSampler wrong;
    explicit OneInFour(const VocabularySpec& v) : vocab(v), oracle(v), wrong(v) {}
    StepSample sample_step(const Context& ctx, int max_tokens, Rng& rng) const override {
      if (ctx.prefix.empty()) ++rollout;  // a fresh rollout starts
      return rollout % 4 == 0 ? oracle.sample_step(ctx, max_tokens, rng)
                              : wrong.sample_step(ctx, max_tokens, rng);
    }
  } policy(vocab);

  Rng rng(1);
  CHECK(pass1_at_k(vocab, p, policy, verifier, 4, rng) == doctest::Approx(0.25));
}

TEST_CASE("direct_rollouts basics") {
  const VocabularySpec vocab = VocabularySpec::standard();
  const Verifier verifier = exact_verifier(vocab);
  const Problem p = make_problem(5, 7);
  Rng rng(2);

  const OracleSampler oracle(vocab);
  CHECK(direct_rollouts(vocab, p, oracle, verifier, 0, rng).empty());

  const auto four = direct_rollouts(vocab, p, oracle, verifier, 4, rng);
  REQUIRE(four.size() == 4);
  for (const Trajectory& t : four) {
    CHECK(t.label == TrajLabel::correct);
    CHECK(t.source == TrajSource::direct_rollout);
    CHECK(t.terminal_reward == 1.0);
    REQUIRE(!t.per_node_q.empty());
    for (double q : t.per_node_q) CHECK(q == 1.0);
    CHECK(verify(vocab, p, t.tokens) == 1);
  }

  // Replay determinism: same fork tag, same label multiset.
  LinearPolicy uniform(vocab);
  Rng r1 = Rng(9).fork(5);
  Rng r2 = Rng(9).fork(5);
  const auto a = direct_rollouts(vocab, p, uniform, verifier, 8, r1, 8, 8);
  const auto b = direct_rollouts(vocab, p, uniform, verifier, 8, r2, 8, 8);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].tokens == b[i].tokens);
  }

  // Incomplete rollouts keep the incomplete label.
  const NeverAnswerSampler never(vocab);
  const auto stuck = direct_rollouts(vocab, p, never, verifier, 1, rng, 4, 4);
  REQUIRE(stuck.size() == 1);
  CHECK(stuck[0].label == TrajLabel::incomplete);
  CHECK(stuck[0].step_count() == 4);
}

namespace {

// Independent repetition scan: literal definition, quadratic and obvious.
bool has_repeated_block(const std::vector<Token>& tokens, int min_block, int repeats) {
  const int n = static_cast<int>(tokens.size());
  for (int block = min_block; block <= n / repeats; ++block) {
    for (int start = 0; start + block * repeats <= n; ++start) {
      bool all = true;
      for (int r = 1; r < repeats && all; ++r)
        for (int k = 0; k < block && all; ++k)
          all = tokens[static_cast<std::size_t>(start + k)] ==
                tokens[static_cast<std::size_t>(start + r * block + k)];
      if (all) return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("degenerate_filter drops repetition, keeps correct trajectories") {
  const VocabularySpec vocab = VocabularySpec::standard();
  Trajectory t;
  t.label = TrajLabel::incorrect;
  t.tokens.assign(8, vocab.token_id("add_1"));
  t.step_sizes = {8};
  t.per_node_q = {-1.0};
  CHECK(!degenerate_filter(t));

  Trajectory correct = t;
  correct.label = TrajLabel::correct;
  CHECK(degenerate_filter(correct));  // correctness exemption

  Trajectory varied;
  varied.label = TrajLabel::incorrect;
  for (int i = 0; i < 20; ++i)
    varied.tokens.push_back(static_cast<Token>(i % 5));
  varied.step_sizes = {20};
  varied.per_node_q = {-1.0};
  // Scan oracle agrees there is no qualifying repeat at the defaults.
  CHECK(!has_repeated_block(varied.tokens, 1, 8));
  CHECK(degenerate_filter(varied));

  Trajectory over;
  over.label = TrajLabel::incomplete;
  over.tokens.assign(50, vocab.sep_id());
  CHECK(!degenerate_filter(over, DegenerateFilterParams{1, 8, 40}));
}

TEST_CASE("degenerate_filter matches the brute-force scan on random inputs") {
  const DegenerateFilterParams params{2, 3, 1 << 20};
  Rng rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    Trajectory t;
    t.label = TrajLabel::incorrect;
    const int len = static_cast<int>(rng.uniform_int(0, 24));
    for (int i = 0; i < len; ++i)
      t.tokens.push_back(static_cast<Token>(rng.uniform_int(0, 2)));
    CHECK(degenerate_filter(t, params) ==
          !has_repeated_block(t.tokens, params.min_block, params.min_repeats));
  }
}
