#pragma once

// Reference loss computations for critic training: token-level cross entropy
// over a target critique, binary cross entropy for the score head, and their
// weighted sum. Pure functions over probabilities; no model state.

#include <vector>

namespace treecrit {

struct TokenProbSequence {
  // Probability the model assigned to each target critique token, in order.
  std::vector<double> probs;
};

// -sum(log p_t). Throws std::domain_error when the sequence is empty or any
// probability lies outside (0, 1].
double lm_loss(const TokenProbSequence& seq);

struct ScoreLossResult {
  double value = 0.0;
  bool clamped = false;  // v_hat sat on a boundary and was nudged inward
};

// Binary cross entropy -[v log v̂ + (1-v) log(1-v̂)]. v must be 0 or 1.
// v_hat exactly 0 or 1 is clamped to [1e-12, 1-1e-12] and flagged; values
// outside [0, 1] are a domain error.
ScoreLossResult score_loss(int v, double v_hat);

// Analytic derivative of the score loss in v_hat: (v̂ - v) / (v̂ (1 - v̂)).
double score_loss_grad(int v, double v_hat);

// lm + lambda * score. lambda must be >= 0.
double total_loss(double lm, double score, double lambda);

}  // namespace treecrit
