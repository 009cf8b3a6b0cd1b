#include "treecrit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace treecrit {

double lm_loss(const TokenProbSequence& seq) {
  if (seq.probs.empty()) throw std::domain_error("token probability sequence is empty");
  double loss = 0.0;
  for (std::size_t i = 0; i < seq.probs.size(); ++i) {
    double p = seq.probs[i];
    if (!(p > 0.0) || p > 1.0)
      throw std::domain_error("token probability outside (0, 1] at index " + std::to_string(i));
    loss -= std::log(p);
  }
  return loss;
}

ScoreLossResult score_loss(int v, double v_hat) {
  if (v != 0 && v != 1) throw std::domain_error("label v must be 0 or 1");
  if (v_hat < 0.0 || v_hat > 1.0) throw std::domain_error("v_hat outside [0, 1]");

  constexpr double eps = 1e-12;
  ScoreLossResult result;
  if (v_hat <= 0.0 || v_hat >= 1.0) {
    result.clamped = true;
    v_hat = std::clamp(v_hat, eps, 1.0 - eps);
  }
  result.value = -(v * std::log(v_hat) + (1 - v) * std::log(1.0 - v_hat));
  return result;
}

double score_loss_grad(int v, double v_hat) {
  if (v != 0 && v != 1) throw std::domain_error("label v must be 0 or 1");
  if (!(v_hat > 0.0) || !(v_hat < 1.0)) throw std::domain_error("v_hat must lie inside (0, 1)");
  return (v_hat - v) / (v_hat * (1.0 - v_hat));
}

double total_loss(double lm, double score, double lambda) {
  if (lm < 0.0 || score < 0.0) throw std::domain_error("loss terms must be nonnegative");
  if (lambda < 0.0) throw std::domain_error("lambda must be nonnegative");
  return lm + lambda * score;
}

}  // namespace treecrit
