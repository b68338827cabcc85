#pragma once

#include <functional>
#include <span>

#include "treerl/environment.hpp"
#include "treerl/policy.hpp"
#include "treerl/trajectory.hpp"

namespace treerl {

/// Exact outcome check used throughout search and training.
using Verifier = std::function<int(const Problem&, std::span<const Token>)>;

/// The environment's own verifier, bound to a vocabulary.
Verifier exact_verifier(const VocabularySpec& vocab);

/// Tree-free root-to-terminal rollouts. Every step's q is the outcome
/// reward, so these train with outcome-style advantages only.
std::vector<Trajectory> direct_rollouts(const VocabularySpec& vocab,
                                        const Problem& problem,
                                        const StepSampler& policy,
                                        const Verifier& verifier, int count,
                                        Rng& rng, int max_steps = 64,
                                        int max_step_tokens = 16);

/// Fraction of K independent rollouts that verify correct; in {0, 1/K, .., 1}.
double pass1_at_k(const VocabularySpec& vocab, const Problem& problem,
                  const StepSampler& policy, const Verifier& verifier, int k,
                  Rng& rng, int max_steps = 64, int max_step_tokens = 16);

}  // namespace treerl
