#include "rlrt/credit.hpp"

#include <algorithm>
#include <cmath>

#include "rlrt/error.hpp"

namespace rlrt {

GroupCredit group_advantages(std::span<const int> rewards, bool normalize_std) {
  if (rewards.size() < 2) fail(ErrorCode::kGroupTooSmall, "group needs at least 2 rollouts");
  GroupCredit g;
  g.rewards.assign(rewards.begin(), rewards.end());
  g.normalize_std = normalize_std;
  g.degenerate = std::all_of(rewards.begin(), rewards.end(), [&](int r) { return r == rewards[0]; });
  g.advantages.assign(rewards.size(), 0.0);
  if (g.degenerate) return g;

  const auto k = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (int r : rewards) mean += r;
  mean /= k;
  double var = 0.0;
  for (int r : rewards) var += (r - mean) * (r - mean);
  const double stdev = std::sqrt(var / k);
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const double centered = rewards[i] - mean;
    g.advantages[i] = normalize_std ? centered / (stdev + 1e-8) : centered;
  }
  return g;
}

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

double rlsd_weight(double d_hat, int advantage_sign) {
  return std::exp(-static_cast<double>(advantage_sign) * d_hat);
}

double rlrt_weight(double d_hat, int advantage_sign) {
  return std::exp(static_cast<double>(advantage_sign) * d_hat);
}

double mixed_factor(double weight, double lambda, double eps_w) {
  return (1.0 - lambda) + lambda * std::clamp(weight, 1.0 - eps_w, 1.0 + eps_w);
}

double gated_token_advantage(double advantage, double weight, double lambda, double eps_w, int reward,
                             Gate gate) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorCode::kInvalidArgs, "lambda must lie in [0, 1]");
  if (!(eps_w > 0.0)) fail(ErrorCode::kInvalidArgs, "eps_w must be positive");
  if (gate == Gate::kRewardGated && reward == 0) return advantage;
  return advantage * mixed_factor(weight, lambda, eps_w);
}

DistillLoss sdpo_distill_loss(const DistOverVocab& teacher, const DistOverVocab& student,
                              std::size_t top_k, double js_alpha) {
  const std::size_t n = student.size();
  if (teacher.size() != n) fail(ErrorCode::kLengthMismatch, "teacher/student size mismatch");
  if (!(js_alpha > 0.0 && js_alpha < 1.0)) fail(ErrorCode::kInvalidArgs, "js_alpha must lie in (0, 1)");
  if (top_k > n) fail(ErrorCode::kInvalidArgs, "top_k exceeds vocabulary");

  std::vector<bool> support(n, true);
  if (top_k != 0 && top_k < n) {
    support.assign(n, false);
    for (std::size_t i : top_k_indices(teacher.probs, top_k)) support[i] = true;
    for (std::size_t i : top_k_indices(student.probs, top_k)) support[i] = true;
  }
  double zt = 0.0;
  double zs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!support[i]) continue;
    zt += teacher.probs[i];
    zs += student.probs[i];
  }

  DistillLoss out;
  out.grad_logits.assign(n, 0.0);
  // dL/dq_i = (1 - alpha) * log(q_i / M_i) for the renormalized student q;
  // chain through the softmax restricted to the support.
  std::vector<double> g(n, 0.0);
  double a = 0.0;
  double b = 0.0;
  double mean_g = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!support[i]) continue;
    const double p = teacher.probs[i] / zt;
    const double q = student.probs[i] / zs;
    const double m = js_alpha * p + (1.0 - js_alpha) * q;
    if (p > 0.0) a += p * (std::log(p) - std::log(m));
    if (q > 0.0) {
      b += q * (std::log(q) - std::log(m));
      g[i] = (1.0 - js_alpha) * (std::log(q) - std::log(m));
      mean_g += q * g[i];
    }
  }
  out.loss = js_alpha * a + (1.0 - js_alpha) * b;
  for (std::size_t i = 0; i < n; ++i) {
    if (!support[i]) continue;
    const double q = student.probs[i] / zs;
    out.grad_logits[i] = q * (g[i] - mean_g);
  }
  return out;
}

SrpoRoute srpo_route(int reward) { return reward == 0 ? SrpoRoute::kDistillLoss : SrpoRoute::kGrpoLoss; }

}  // namespace rlrt
