#include "treerl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace treerl {

using json = nlohmann::ordered_json;

namespace {

// Feature block offsets. Everything is an indicator; the layout is fixed by
// the vocabulary's op count.
// Answer-mode states activate nothing outside their own block, and the
// block is duplicated by whether the computed value hit the target. Reward
// for verified spelling and punishment for doomed spelling therefore land
// on disjoint weight rows; with shared rows a linear model forgets how to
// spell whenever confident wrong answers dominate a batch.
struct FeatureLayout {
  int bias;
  int dead;                // malformed or overflowed
  int in_answer_on;        // answering with value == target
  int in_answer_off;       // answering with value != target
  int expected_on_target;  // 12 slots: minus, digits 0..9, answer-complete
  int expected_off_target; // same block when the value is wrong
  int diff_sign;           // 3 slots: below, equal, above target
  int diff_magnitude;      // 8 log-ish buckets of |target - value|
  int ratio;               // 3 slots: target == 2v, 3v, -v
  int finishing_op;        // one per op: op(value) == target
  int last_class;          // 5 slots: none, op, sep, ans, answer token
  int step_bucket;         // 4 coarse buckets of current step index
  int total;

  explicit FeatureLayout(int op_count) {
    int at = 0;
    bias = at++;
    dead = at++;
    in_answer_on = at++;
    in_answer_off = at++;
    expected_on_target = at;
    at += 12;
    expected_off_target = at;
    at += 12;
    diff_sign = at;
    at += 3;
    diff_magnitude = at;
    at += 8;
    ratio = at;
    at += 3;
    finishing_op = at;
    at += op_count;
    last_class = at;
    at += 5;
    step_bucket = at;
    at += 4;
    total = at;
  }
};

int magnitude_bucket(std::int64_t diff) {
  const std::int64_t a = diff < 0 ? -diff : diff;
  if (a == 0) return 0;
  if (a == 1) return 1;
  if (a <= 3) return 2;
  if (a <= 7) return 3;
  if (a <= 15) return 4;
  if (a <= 63) return 5;
  if (a <= 1023) return 6;
  return 7;
}

int step_bucket(int steps_completed) {
  const int step = steps_completed + 1;  // step currently being generated
  if (step <= 2) return 0;
  if (step <= 4) return 1;
  if (step <= 8) return 2;
  return 3;
}

}  // namespace

int feature_dim(const VocabularySpec& vocab) {
  return FeatureLayout(static_cast<int>(vocab.ops.size())).total;
}

Eigen::VectorXd context_features(const VocabularySpec& vocab,
                                 const Problem& problem,
                                 const EnvState& state) {
  const FeatureLayout lay(static_cast<int>(vocab.ops.size()));
  Eigen::VectorXd f = Eigen::VectorXd::Zero(lay.total);
  const bool dead = state.malformed || state.overflowed;

  if (!dead && state.in_answer) {
    const bool on_target = state.value == problem.target_value;
    f[on_target ? lay.in_answer_on : lay.in_answer_off] = 1.0;
    const int block = on_target ? lay.expected_on_target : lay.expected_off_target;
    const std::size_t pos = state.declared.size();
    const std::string& want = state.expected_answer;
    if (state.answer_closed || pos >= want.size()) {
      f[block + 11] = 1.0;  // answer complete: emit sep
    } else {
      const char c = want[pos];
      f[block + (c == '-' ? 0 : 1 + (c - '0'))] = 1.0;
    }
    return f;
  }

  f[lay.bias] = 1.0;
  if (dead) f[lay.dead] = 1.0;
  if (!dead) {
    const std::int64_t v = state.value;
    const std::int64_t diff = problem.target_value - v;
    f[lay.diff_sign + (diff < 0 ? 0 : diff == 0 ? 1 : 2)] = 1.0;
    f[lay.diff_magnitude + magnitude_bucket(diff)] = 1.0;
    if (v != 0) {
      if (problem.target_value == 2 * v) f[lay.ratio + 0] = 1.0;
      if (problem.target_value == 3 * v) f[lay.ratio + 1] = 1.0;
      if (problem.target_value == -v) f[lay.ratio + 2] = 1.0;
    }
    for (std::size_t j = 0; j < vocab.ops.size(); ++j) {
      const std::int64_t w = vocab.ops[j].apply(v);
      if (w == problem.target_value && w <= kValueBound && w >= -kValueBound)
        f[lay.finishing_op + static_cast<int>(j)] = 1.0;
    }
  }

  int last = 0;
  if (state.last_token >= 0) {
    if (vocab.is_op(state.last_token)) last = 1;
    else if (state.last_token == vocab.sep_id()) last = 2;
    else if (state.last_token == vocab.ans_id()) last = 3;
    else last = 4;
  }
  f[lay.last_class + last] = 1.0;
  f[lay.step_bucket + step_bucket(state.steps_completed)] = 1.0;
  return f;
}

LinearPolicy::LinearPolicy(VocabularySpec vocab, double temperature)
    : vocab_(std::move(vocab)), temperature_(temperature) {
  if (temperature_ <= 0.0) throw ConfigError("policy temperature must be > 0");
  params_.weights = Eigen::MatrixXd::Zero(feature_dim(vocab_), vocab_.size());
}

LinearPolicy LinearPolicy::with_temperature(double temperature) const {
  LinearPolicy copy = *this;
  if (temperature <= 0.0) throw ConfigError("policy temperature must be > 0");
  copy.temperature_ = temperature;
  return copy;
}

Eigen::VectorXd LinearPolicy::token_logprobs(const EnvState& state,
                                             const Problem& problem,
                                             Eigen::VectorXd* probs,
                                             Eigen::VectorXd* features) const {
  Eigen::VectorXd f = context_features(vocab_, problem, state);
  Eigen::VectorXd logits = (params_.weights.transpose() * f) / temperature_;
  const double peak = logits.maxCoeff();
  Eigen::VectorXd shifted = logits.array() - peak;
  Eigen::VectorXd expv = shifted.array().exp();
  const double total = expv.sum();
  Eigen::VectorXd logp = shifted.array() - std::log(total);
  logp = logp.cwiseMin(0.0);  // guard FP wobble on saturated rows
  if (probs) *probs = expv / total;
  if (features) *features = std::move(f);
  return logp;
}

StepSample LinearPolicy::sample_step(const Context& ctx, int max_step_tokens,
                                     Rng& rng) const {
  if (!ctx.problem) throw ContractViolation("sample_step: context has no problem");
  if (max_step_tokens < 1) throw ContractViolation("sample_step: max_step_tokens < 1");
  EnvState state = initial_state(*ctx.problem);
  for (Token t : ctx.prefix) advance(state, vocab_, t);

  StepSample sample;
  Eigen::VectorXd probs;
  for (int produced = 0; produced < max_step_tokens; ++produced) {
    const Eigen::VectorXd logp = token_logprobs(state, *ctx.problem, &probs);
    const double u = rng.uniform();
    double cumulative = 0.0;
    Token token = static_cast<Token>(probs.size() - 1);
    for (int t = 0; t < probs.size(); ++t) {
      cumulative += probs[t];
      if (u < cumulative) {
        token = static_cast<Token>(t);
        break;
      }
    }
    sample.tokens.push_back(token);
    sample.logprobs.push_back(logp[token]);
    advance(state, vocab_, token);
    if (token == vocab_.sep_id()) break;  // step (or answer) closed
  }

  double sum = 0.0;
  for (double lp : sample.logprobs) sum -= lp;
  sample.entropy_estimate = sample.logprobs.empty()
                                ? 0.0
                                : sum / static_cast<double>(sample.logprobs.size());
  return sample;
}

std::vector<double> LinearPolicy::logprob_tokens(
    const Context& ctx, std::span<const Token> tokens) const {
  if (!ctx.problem) throw ContractViolation("logprob_tokens: context has no problem");
  EnvState state = initial_state(*ctx.problem);
  for (Token t : ctx.prefix) advance(state, vocab_, t);
  std::vector<double> out;
  out.reserve(tokens.size());
  for (Token t : tokens) {
    if (!vocab_.valid(t)) throw ContractViolation("logprob_tokens: token out of vocabulary");
    const Eigen::VectorXd logp = token_logprobs(state, *ctx.problem);
    out.push_back(logp[t]);
    advance(state, vocab_, t);
  }
  return out;
}

Eigen::MatrixXd LinearPolicy::grad_logprob(const Context& ctx,
                                           std::span<const Token> tokens) const {
  if (!ctx.problem) throw ContractViolation("grad_logprob: context has no problem");
  EnvState state = initial_state(*ctx.problem);
  for (Token t : ctx.prefix) advance(state, vocab_, t);
  Eigen::MatrixXd grad =
      Eigen::MatrixXd::Zero(params_.weights.rows(), params_.weights.cols());
  Eigen::VectorXd probs;
  Eigen::VectorXd features;
  for (Token t : tokens) {
    if (!vocab_.valid(t)) throw ContractViolation("grad_logprob: token out of vocabulary");
    token_logprobs(state, *ctx.problem, &probs, &features);
    // d logprob / d W = f (e_t - p)^T, scaled by 1/temperature.
    Eigen::VectorXd delta = -probs;
    delta[t] += 1.0;
    grad.noalias() += (features / temperature_) * delta.transpose();
    advance(state, vocab_, t);
  }
  return grad;
}

void save_policy(const std::string& path, const LinearPolicy& policy) {
  json doc;
  doc["format_version"] = 1;
  doc["feature_dim"] = policy.feature_count();
  doc["vocab_size"] = policy.vocab_size();
  doc["op_count"] = policy.vocab().ops.size();
  json ops = json::array();
  for (const StepOp& op : policy.vocab().ops) ops.push_back(op.name());
  doc["ops"] = ops;
  doc["version"] = policy.params().version;
  doc["temperature"] = policy.temperature();
  json weights = json::array();
  const Eigen::MatrixXd& w = policy.params().weights;
  for (int r = 0; r < w.rows(); ++r)
    for (int c = 0; c < w.cols(); ++c) weights.push_back(w(r, c));
  doc["weights"] = std::move(weights);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open policy file for writing: " + path);
  out << doc.dump(2) << "\n";
}

namespace {

StepOp op_from_name(const std::string& name) {
  if (name == "neg") return {OpKind::negate, 0};
  const auto split = name.find('_');
  if (split == std::string::npos) throw ConfigError("bad op name: " + name);
  const std::string head = name.substr(0, split);
  const std::int64_t k = std::stoll(name.substr(split + 1));
  if (head == "add") return {OpKind::add, k};
  if (head == "sub") return {OpKind::add, -k};
  if (head == "mul") return {OpKind::mul, k};
  throw ConfigError("bad op name: " + name);
}

}  // namespace

LinearPolicy heuristic_policy(const VocabularySpec& vocab, double strength) {
  LinearPolicy policy(vocab);
  Eigen::MatrixXd& w = policy.params().weights;

  const auto boost = [&](const Problem& pa, const EnvState& a, const Problem& pb,
                         const EnvState& b, Token token, double amount) {
    const Eigen::VectorXd fa = context_features(vocab, pa, a);
    const Eigen::VectorXd fb = context_features(vocab, pb, b);
    for (int i = 0; i < fa.size(); ++i)
      if (fa[i] != 0.0 && fb[i] == 0.0) w(i, token) += amount * strength;
  };

  Problem dummy;
  dummy.start_value = 0;
  dummy.target_value = 1;

  // Answer copying: expecting character c should emit exactly c. The base
  // policy spells faithfully whether or not the value it computed is right,
  // so both expected-token blocks get the same prior.
  for (std::int64_t value : {dummy.target_value, dummy.target_value + 1}) {
    for (int digit = -1; digit <= 9; ++digit) {
      EnvState a;
      a.in_answer = true;
      a.value = value;
      a.expected_answer = digit < 0 ? "-7" : std::to_string(digit);
      EnvState b = a;
      b.expected_answer = digit == 5 ? "6" : "5";
      const Token want = digit < 0 ? vocab.minus_id() : vocab.digit_id(digit);
      boost(dummy, a, dummy, b, want, 3.0);
    }
    EnvState a;  // answer fully spelled: close the step
    a.in_answer = true;
    a.value = value;
    a.expected_answer = "";
    EnvState b = a;
    b.expected_answer = "5";
    boost(dummy, a, dummy, b, vocab.sep_id(), 3.0);
  }
  // Declare once the running value equals the target.
  {
    Problem solved = dummy;
    solved.start_value = 3;
    solved.target_value = 3;
    Problem unsolved = dummy;
    unsolved.start_value = 3;
    unsolved.target_value = 4;
    boost(solved, initial_state(solved), unsolved, initial_state(unsolved),
          vocab.ans_id(), 2.0);
  }
  // Each op when it finishes the problem in one application.
  for (std::size_t j = 0; j < vocab.ops.size(); ++j) {
    Problem a = dummy;
    a.start_value = 10;
    a.target_value = vocab.ops[j].apply(a.start_value);
    if (a.target_value == a.start_value) continue;
    Problem b = a;
    b.target_value = a.target_value + 1;
    boost(a, initial_state(a), b, initial_state(b), static_cast<Token>(j), 2.0);
  }
  return policy;
}

LinearPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open policy file: " + path);
  const json doc = json::parse(in);
  if (doc.value("format_version", 0) != 1)
    throw ConfigError("unsupported policy format_version in " + path);
  VocabularySpec vocab;
  for (const auto& name : doc.at("ops")) vocab.ops.push_back(op_from_name(name));
  LinearPolicy policy(vocab, doc.value("temperature", 1.0));
  const int rows = doc.at("feature_dim").get<int>();
  const int cols = doc.at("vocab_size").get<int>();
  if (rows != policy.feature_count() || cols != policy.vocab_size())
    throw ConfigError("policy shape header does not match vocabulary in " + path);
  const auto& weights = doc.at("weights");
  if (static_cast<int>(weights.size()) != rows * cols)
    throw ConfigError("policy weight count does not match shape header in " + path);
  Eigen::MatrixXd w(rows, cols);
  int at = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) w(r, c) = weights[at++].get<double>();
  policy.params().weights = std::move(w);
  policy.params().version = doc.at("version").get<int>();
  return policy;
}

}  // namespace treerl
