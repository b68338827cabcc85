#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "treerl/common.hpp"
#include "treerl/environment.hpp"
#include "treerl/vocab.hpp"

namespace treerl {

/**
 * Generation context: the problem plus the concatenated tokens of all
 * ancestor steps. Everything the policy conditions on is derived from this
 * by replaying the environment automaton.
 */
struct Context {
  const Problem* problem = nullptr;
  std::vector<Token> prefix;
};

/// One sampled step with exact per-token log-probabilities (natural log)
/// and the Monte Carlo entropy estimate (mean of -logprob over the step).
struct StepSample {
  std::vector<Token> tokens;
  std::vector<double> logprobs;
  double entropy_estimate = 0.0;
};

struct PolicyParams {
  Eigen::MatrixXd weights;  // feature_dim x vocab_size
  int version = 0;
};

/// Minimal sampling surface the search needs; lets tests plug in scripted
/// policies without touching the linear model.
struct StepSampler {
  virtual ~StepSampler() = default;
  virtual StepSample sample_step(const Context& ctx, int max_step_tokens,
                                 Rng& rng) const = 0;
};

/// Number of hand-coded context features for a given vocabulary.
int feature_dim(const VocabularySpec& vocab);

/// Feature vector for the next-token distribution given the replayed
/// environment state. All entries are 0/1 indicators plus a bias.
Eigen::VectorXd context_features(const VocabularySpec& vocab,
                                 const Problem& problem, const EnvState& state);

/**
 * Linear-softmax step policy over context features.
 *
 * Sampling, scoring and gradients share one kernel, so re-scoring a sampled
 * step under its generating parameters reproduces the stored logprobs
 * bit-for-bit. Value semantics throughout: a snapshot is a plain copy and
 * optimizer steps produce a fresh instance.
 */
class LinearPolicy : public StepSampler {
 public:
  explicit LinearPolicy(VocabularySpec vocab, double temperature = 1.0);

  StepSample sample_step(const Context& ctx, int max_step_tokens,
                         Rng& rng) const override;

  /// Teacher-forced exact conditional log-probabilities of `tokens` after
  /// ctx.prefix.
  std::vector<double> logprob_tokens(const Context& ctx,
                                     std::span<const Token> tokens) const;

  /// Analytic gradient of sum(logprob_tokens) w.r.t. the weight matrix.
  Eigen::MatrixXd grad_logprob(const Context& ctx,
                               std::span<const Token> tokens) const;

  /// Deep immutable copy (the "old" policy of an importance ratio).
  LinearPolicy snapshot() const { return *this; }

  /// Same weights, different sampling temperature (evaluation-time knob).
  LinearPolicy with_temperature(double temperature) const;

  const VocabularySpec& vocab() const { return vocab_; }
  double temperature() const { return temperature_; }
  const PolicyParams& params() const { return params_; }
  PolicyParams& params() { return params_; }
  int feature_count() const { return static_cast<int>(params_.weights.rows()); }
  int vocab_size() const { return static_cast<int>(params_.weights.cols()); }

  /// Per-position distribution kernel: logprob of every token given state.
  /// Returns the log-softmax vector; `probs` (optional) receives softmax.
  Eigen::VectorXd token_logprobs(const EnvState& state,
                                 const Problem& problem,
                                 Eigen::VectorXd* probs = nullptr,
                                 Eigen::VectorXd* features = nullptr) const;

 private:
  VocabularySpec vocab_;
  double temperature_;
  PolicyParams params_;
};

/// Exact round-trip serialization of the weight matrix with shape header.
void save_policy(const std::string& path, const LinearPolicy& policy);
LinearPolicy load_policy(const std::string& path);

/**
 * Hand-coded competence prior: the desk-scale stand-in for a pretrained
 * base model. `strength` 0 is the uniform policy; around 1.5 it solves most
 * one-op problems and few deeper ones, leaving a rich hard set for the
 * curriculum to work on.
 *
 * Weights are placed by differential probing (pairs of states isolating one
 * indicator), so the construction tracks the feature layout automatically.
 */
LinearPolicy heuristic_policy(const VocabularySpec& vocab, double strength);

}  // namespace treerl
