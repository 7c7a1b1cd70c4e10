#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rlrt/prob.hpp"

namespace rlrt {

/// Group-relative advantages for K rollouts of one prompt.
struct GroupCredit {
  std::vector<int> rewards;
  std::vector<double> advantages;
  bool normalize_std = false;
  bool degenerate = false;  ///< all rewards equal; advantages are all zero
};

/// A = r - mean, divided by (population std + 1e-8) when normalize_std.
GroupCredit group_advantages(std::span<const int> rewards, bool normalize_std);

/// sign with sign(0) = 0.
int sign_of(double x);

/// RLSD: (P_T/P_S)^sign = exp(-sign * d_hat).
double rlsd_weight(double d_hat, int advantage_sign);
/// RLRT: (P_S/P_T)^sign = exp(+sign * d_hat).
double rlrt_weight(double d_hat, int advantage_sign);

enum class Gate { kRewardGated, kAlways };

/// Mixed factor (1 - lambda) + lambda * clip(w, 1 - eps_w, 1 + eps_w).
double mixed_factor(double weight, double lambda, double eps_w);

/// Token advantage A * mixed_factor, or A untouched on reward-0 rollouts under kRewardGated.
double gated_token_advantage(double advantage, double weight, double lambda, double eps_w, int reward,
                             Gate gate);

/// Per-token credit along one rollout.
struct TokenCredit {
  std::vector<double> weights;      ///< raw w_t (1 on skipped positions)
  std::vector<double> mixed;        ///< clipped mixed factor m_t
  std::vector<double> advantages;   ///< A_t
};

struct DistillLoss {
  double loss = 0.0;
  std::vector<double> grad_logits;  ///< d loss / d student logits
};

/// Generalized JS between teacher (constant) and student, on the union of the
/// two top-k supports renormalized. Mixture M = alpha*P_T + (1-alpha)*P_S.
/// top_k == 0 or >= V means the full vocabulary.
DistillLoss sdpo_distill_loss(const DistOverVocab& teacher, const DistOverVocab& student,
                              std::size_t top_k, double js_alpha);

enum class SrpoRoute { kDistillLoss, kGrpoLoss };

SrpoRoute srpo_route(int reward);

}  // namespace rlrt
