#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlrt/credit.hpp"
#include "rlrt/policy.hpp"
#include "rlrt/taskenv.hpp"
#include "rlrt/teacher.hpp"

namespace rlrt {

enum class Scheme { kGrpo, kRlsd, kRlrt, kRlrtAll, kSdpo, kSrpo };

std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view s);
std::string_view to_string(TeacherKind k);
TeacherKind teacher_kind_from_string(std::string_view s);

struct TrainConfig {
  Scheme scheme = Scheme::kRlrt;
  TeacherKind teacher = TeacherKind::kContextConditioned;
  int group_size = 8;
  int prompts_per_batch = 32;
  int ppo_epochs = 2;
  int mini_batches = 2;
  double learning_rate = 1e-3;
  double sdpo_lr_scale = 1.0;
  double srpo_lr_scale = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  int warmup_steps = 10;
  double eps_low = 0.2;
  double eps_high = 0.28;
  double lambda_init = 0.5;
  int lambda_decay_steps = 0;  ///< 0 keeps lambda constant
  double eps_w = 1.0;
  std::optional<bool> normalize_std;  ///< unset: on for RLSD/RLRT/RLRT_ALL, off otherwise
  double temperature = 1.0;
  int total_steps = 300;
  std::size_t distill_top_k = 0;  ///< 0 = full vocabulary
  double js_alpha = 0.5;
  double srpo_beta = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
  bool effective_normalize_std() const;
  /// Mixing strength at `step`; 0 for schemes without token reweighting.
  double lambda_at(int step) const;
  double learning_rate_at(int step) const;
};

/// One sampled rollout with everything the update needs.
struct RolloutRecord {
  Rollout rollout;
  AsymmetryProfile profile;     ///< student/teacher distributions per position
  bool has_teacher = false;     ///< false when no privileged context existed
  double group_advantage = 0.0;
  TokenCredit credit;           ///< filled by train_step
  bool distill = false;         ///< routed to the distillation loss
};

struct PromptGroup {
  int prompt = 0;
  GroupCredit credit;
  std::vector<RolloutRecord> rollouts;
};

struct Batch {
  int step = 0;
  std::uint64_t policy_version = 0;
  std::vector<PromptGroup> groups;

  std::size_t num_rollouts() const;
};

/// Samples prompts_per_batch prompts with group_size rollouts each from the
/// student, and evaluates the configured teacher at every position.
/// Randomness is derived from (config.seed, step), so the result does not
/// depend on any earlier call.
Batch collect_batch(const PolicyEvaluator& policy, const TaskSpec& task, const TrainConfig& config, int step);

/// Fills `credit` and `distill` on every rollout according to the scheme.
void assign_credit(Batch& batch, const TrainConfig& config);

/// One token-level loss term source.
struct LossItem {
  const RolloutRecord* record = nullptr;
  std::span<const double> advantages;  ///< per-token A_t (surrogate items)
  bool distill = false;
  double distill_weight = 1.0;
};

struct LossResult {
  double loss = 0.0;
  ParamVector grad;
  std::size_t tokens = 0;
  std::size_t surrogate_tokens = 0;
  std::size_t clipped_tokens = 0;
};

/// Clipped surrogate -min(rho*A, clip(rho, 1-eps_low, 1+eps_high)*A) plus any
/// distillation terms, averaged over every token of every item.
LossResult policy_loss(const PolicyParams& params, std::span<const LossItem> items, double eps_low,
                       double eps_high, std::size_t distill_top_k, double js_alpha);

/// Surrogate-only loss for a set of rollouts with per-token advantages.
LossResult surrogate_loss(const PolicyParams& params, std::span<const RolloutRecord> records,
                          std::span<const std::vector<double>> token_advantages, double eps_low,
                          double eps_high);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t steps = 0;
};

struct TrainerState {
  PolicyParams params;
  AdamState adam;
  int step = 0;
};

struct StepMetrics {
  int step = 0;
  double mean_reward = 0.0;
  double entropy = 0.0;        ///< mean student entropy per position, nats
  double mean_abs_dhat = 0.0;  ///< over non-skipped positions with a teacher
  double mean_dbar = 0.0;      ///< over finite, non-skipped positions with a teacher
  double clip_frac = 0.0;
  double grad_norm = 0.0;      ///< mean pre-clip norm over the step's updates
  double lambda = 0.0;
};

/// L2-norm clipping followed by one AdamW update with decoupled weight decay.
/// Returns the pre-clip gradient norm.
double adamw_update(PolicyParams& params, AdamState& adam, std::span<double> grad, double lr,
                    const TrainConfig& config);

/// Credit assignment, ppo_epochs x mini_batches updates, metrics.
StepMetrics train_step(TrainerState& state, Batch& batch, const TrainConfig& config);

TrainerState make_trainer_state(const TaskSpec& task, const PolicyDims& dims, std::uint64_t seed,
                                double init_scale = 0.05);

}  // namespace rlrt
