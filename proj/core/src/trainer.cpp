#include "rlrt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "rlrt/error.hpp"

namespace rlrt {

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::kGrpo: return "GRPO";
    case Scheme::kRlsd: return "RLSD";
    case Scheme::kRlrt: return "RLRT";
    case Scheme::kRlrtAll: return "RLRT_ALL";
    case Scheme::kSdpo: return "SDPO";
    case Scheme::kSrpo: return "SRPO";
  }
  return "?";
}

Scheme scheme_from_string(std::string_view s) {
  for (Scheme x : {Scheme::kGrpo, Scheme::kRlsd, Scheme::kRlrt, Scheme::kRlrtAll, Scheme::kSdpo, Scheme::kSrpo}) {
    if (to_string(x) == s) return x;
  }
  fail(ErrorCode::kConfig, "unknown scheme '" + std::string(s) + "'");
}

std::string_view to_string(TeacherKind k) {
  return k == TeacherKind::kExactBayes ? "ExactBayes" : "ContextConditioned";
}

TeacherKind teacher_kind_from_string(std::string_view s) {
  if (s == "ExactBayes") return TeacherKind::kExactBayes;
  if (s == "ContextConditioned") return TeacherKind::kContextConditioned;
  fail(ErrorCode::kConfig, "unknown teacher kind '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  const auto bad = [](const std::string& m) { fail(ErrorCode::kConfig, m); };
  if (group_size < 2) bad("group_size must be >= 2");
  if (prompts_per_batch < 1) bad("prompts_per_batch must be >= 1");
  if (ppo_epochs < 1) bad("ppo_epochs must be >= 1");
  if (mini_batches < 1 || mini_batches > prompts_per_batch * group_size) bad("mini_batches out of range");
  if (!(eps_low > 0.0) || !(eps_high >= eps_low)) bad("need eps_high >= eps_low > 0");
  if (!(lambda_init >= 0.0 && lambda_init <= 1.0)) bad("lambda_init must lie in [0, 1]");
  if (lambda_decay_steps < 0) bad("lambda_decay_steps must be >= 0");
  if (!(eps_w > 0.0)) bad("eps_w must be positive");
  if (!(temperature > 0.0)) bad("temperature must be positive");
  if (!(learning_rate > 0.0)) bad("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) bad("adam betas must lie in [0, 1)");
  if (!(grad_clip > 0.0)) bad("grad_clip must be positive");
  if (!(js_alpha > 0.0 && js_alpha < 1.0)) bad("js_alpha must lie in (0, 1)");
  if (total_steps < 0) bad("total_steps must be >= 0");
  if (warmup_steps < 0) bad("warmup_steps must be >= 0");
}

bool TrainConfig::effective_normalize_std() const {
  if (normalize_std) return *normalize_std;
  return scheme == Scheme::kRlsd || scheme == Scheme::kRlrt || scheme == Scheme::kRlrtAll;
}

double TrainConfig::lambda_at(int step) const {
  if (scheme != Scheme::kRlsd && scheme != Scheme::kRlrt && scheme != Scheme::kRlrtAll) return 0.0;
  if (lambda_decay_steps == 0) return lambda_init;
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(lambda_decay_steps);
  return lambda_init * std::max(0.0, frac);
}

double TrainConfig::learning_rate_at(int step) const {
  double lr = learning_rate;
  if (scheme == Scheme::kSdpo) lr *= sdpo_lr_scale;
  if (scheme == Scheme::kSrpo) lr *= srpo_lr_scale;
  if (warmup_steps > 0 && step < warmup_steps) {
    lr *= static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  }
  return lr;
}

std::size_t Batch::num_rollouts() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.rollouts.size();
  return n;
}

Batch collect_batch(const PolicyEvaluator& policy, const TaskSpec& task, const TrainConfig& config, int step) {
  config.validate();
  Batch batch;
  batch.step = step;
  batch.policy_version = policy.params().version();
  const auto ustep = static_cast<std::uint64_t>(step);

  Rng prompt_rng(derive_seed(config.seed, Stream::kPrompt, {ustep}));
  std::map<int, std::unique_ptr<SuccessTable>> tables;

  for (int i = 0; i < config.prompts_per_batch; ++i) {
    PromptGroup group;
    group.prompt = sample_prompt(task, prompt_rng);
    std::vector<Rollout> rollouts;
    std::vector<int> rewards;
    for (int k = 0; k < config.group_size; ++k) {
      Rng rng(derive_seed(config.seed, Stream::kSampling,
                          {ustep, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k)}));
      Rollout r = sample_rollout(policy, task, group.prompt, config.temperature, rng);
      r.group_id = i;
      rewards.push_back(r.reward);
      rollouts.push_back(std::move(r));
    }
    group.credit = group_advantages(rewards, config.effective_normalize_std());

    const SuccessTable* table = nullptr;
    if (config.teacher == TeacherKind::kExactBayes) {
      auto& slot = tables[group.prompt];
      if (!slot) slot = std::make_unique<SuccessTable>(task, policy, group.prompt);
      table = slot.get();
    }

    for (std::size_t k = 0; k < rollouts.size(); ++k) {
      RolloutRecord rec;
      rec.group_advantage = group.credit.advantages[k];
      if (config.teacher == TeacherKind::kExactBayes) {
        rec.profile = asymmetry_profile(policy, rollouts[k], ExactBayesView{&task, table});
        rec.has_teacher = true;
      } else {
        std::optional<PrivilegedContext> ctx;
        if (config.scheme == Scheme::kRlsd) {
          ctx = PrivilegedContext{reference_solution(task, group.prompt)};
        } else {
          ctx = pick_context(rollouts, k);
        }
        rec.has_teacher = ctx.has_value();
        ContextView view{ctx.value_or(PrivilegedContext{}), !ctx.has_value()};
        rec.profile = asymmetry_profile(policy, rollouts[k], view);
      }
      rec.rollout = rollouts[k];  // copy: later rollouts may use this one as context
      group.rollouts.push_back(std::move(rec));
    }
    batch.groups.push_back(std::move(group));
  }
  return batch;
}

void assign_credit(Batch& batch, const TrainConfig& config) {
  const double lambda = config.lambda_at(batch.step);
  for (auto& group : batch.groups) {
    for (auto& rec : group.rollouts) {
      const double a = rec.group_advantage;
      const int reward = rec.rollout.reward;
      const std::size_t n = rec.rollout.response.size();
      TokenCredit& c = rec.credit;
      c.weights.assign(n, 1.0);
      c.mixed.assign(n, 1.0);
      c.advantages.assign(n, a);
      rec.distill = false;

      switch (config.scheme) {
        case Scheme::kGrpo:
          break;
        case Scheme::kSdpo:
          rec.distill = true;
          break;
        case Scheme::kSrpo:
          rec.distill = srpo_route(reward) == SrpoRoute::kDistillLoss;
          break;
        case Scheme::kRlsd:
        case Scheme::kRlrt:
        case Scheme::kRlrtAll: {
          const Gate gate = config.scheme == Scheme::kRlrt ? Gate::kRewardGated : Gate::kAlways;
          const int sign = sign_of(a);
          for (std::size_t t = 0; t < n; ++t) {
            double w = 1.0;
            if (rec.has_teacher && !rec.profile.skipped[t]) {
              w = config.scheme == Scheme::kRlsd ? rlsd_weight(rec.profile.d_hat[t], sign)
                                                 : rlrt_weight(rec.profile.d_hat[t], sign);
            }
            c.weights[t] = w;
            c.mixed[t] = mixed_factor(w, lambda, config.eps_w);
            c.advantages[t] = gated_token_advantage(a, w, lambda, config.eps_w, reward, gate);
          }
          break;
        }
      }
      // Without a teacher there is nothing to distill toward.
      if (rec.distill && !rec.has_teacher) rec.distill = false;
    }
  }
}

namespace {

// Forward at `history`, then let `fill` choose dlogits from the distribution.
using LogitFill = std::function<void(const DistOverVocab&, std::span<double>)>;

DistOverVocab backprop_with(const PolicyParams& params, const History& history, const LogitFill& fill,
                            std::span<double> grad) {
  const DistOverVocab p = next_token_dist(params, history);
  std::vector<double> dlogits(p.size(), 0.0);
  fill(p, dlogits);
  bool any = false;
  for (double g : dlogits) any = any || g != 0.0;
  if (any) backprop_logits(params, history, nullptr, dlogits, 1.0, grad);
  return p;
}

}  // namespace

LossResult policy_loss(const PolicyParams& params, std::span<const LossItem> items, double eps_low,
                       double eps_high, std::size_t distill_top_k, double js_alpha) {
  LossResult out;
  out.grad.assign(params.dims().num_params(), 0.0);
  for (const LossItem& item : items) out.tokens += item.record->rollout.response.size();
  if (out.tokens == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(out.tokens);

  for (const LossItem& item : items) {
    const Rollout& r = item.record->rollout;
    History h{r.prompt, {}};
    for (std::size_t t = 0; t < r.response.size(); ++t) {
      const Token y = r.response[t];
      const auto yi = static_cast<std::size_t>(y);
      if (item.distill) {
        const DistOverVocab& teacher = item.record->profile.teacher[t];
        double term = 0.0;
        backprop_with(
            params, h,
            [&](const DistOverVocab& student, std::span<double> dlogits) {
              const DistillLoss dl = sdpo_distill_loss(teacher, student, distill_top_k, js_alpha);
              term = dl.loss;
              for (std::size_t o = 0; o < dlogits.size(); ++o) {
                dlogits[o] = item.distill_weight * inv_n * dl.grad_logits[o];
              }
            },
            out.grad);
        out.loss += item.distill_weight * inv_n * term;
      } else {
        const double a = item.advantages[t];
        const double old_logp = r.student_logprobs[t];
        double term = 0.0;
        bool clipped = false;
        backprop_with(
            params, h,
            [&](const DistOverVocab& p, std::span<double> dlogits) {
              const double ratio = std::exp(p.log_probs[yi] - old_logp);
              clipped = (a > 0.0 && ratio > 1.0 + eps_high) || (a < 0.0 && ratio < 1.0 - eps_low);
              if (clipped) {
                term = -std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high) * a;
                return;
              }
              term = -ratio * a;
              // d(-rho*A)/dlogits = -A * rho * (onehot(y) - p)
              const double coef = -a * ratio * inv_n;
              for (std::size_t o = 0; o < dlogits.size(); ++o) {
                dlogits[o] = coef * ((o == yi ? 1.0 : 0.0) - p.probs[o]);
              }
            },
            out.grad);
        out.loss += inv_n * term;
        ++out.surrogate_tokens;
        if (clipped) ++out.clipped_tokens;
      }
      h.tokens.push_back(y);
    }
  }
  if (!std::isfinite(out.loss)) {
    std::ostringstream msg;
    msg << "non-finite loss " << out.loss << " over " << out.tokens << " tokens (params version "
        << params.version() << ")";
    fail(ErrorCode::kNonFinite, msg.str());
  }
  return out;
}

LossResult surrogate_loss(const PolicyParams& params, std::span<const RolloutRecord> records,
                          std::span<const std::vector<double>> token_advantages, double eps_low,
                          double eps_high) {
  if (records.size() != token_advantages.size()) {
    fail(ErrorCode::kLengthMismatch, "one advantage vector per rollout required");
  }
  std::vector<LossItem> items;
  for (std::size_t i = 0; i < records.size(); ++i) {
    items.push_back(LossItem{&records[i], token_advantages[i], false, 1.0});
  }
  return policy_loss(params, items, eps_low, eps_high, 0, 0.5);
}

double adamw_update(PolicyParams& params, AdamState& adam, std::span<double> grad, double lr,
                    const TrainConfig& config) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) fail(ErrorCode::kNonFinite, "non-finite gradient norm");
  if (norm > config.grad_clip) {
    const double s = config.grad_clip / norm;
    for (double& g : grad) g *= s;
  }
  const std::size_t n = grad.size();
  if (adam.m.size() != n) {
    adam.m.assign(n, 0.0);
    adam.v.assign(n, 0.0);
  }
  adam.steps += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam.steps));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam.steps));
  params.update([&](std::span<double> theta) {
    for (std::size_t i = 0; i < n; ++i) {
      adam.m[i] = config.beta1 * adam.m[i] + (1.0 - config.beta1) * grad[i];
      adam.v[i] = config.beta2 * adam.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
      const double mhat = adam.m[i] / bc1;
      const double vhat = adam.v[i] / bc2;
      theta[i] *= 1.0 - lr * config.weight_decay;
      theta[i] -= lr * mhat / (std::sqrt(vhat) + config.adam_eps);
    }
  });
  return norm;
}

StepMetrics train_step(TrainerState& state, Batch& batch, const TrainConfig& config) {
  config.validate();
  assign_credit(batch, config);

  StepMetrics m;
  m.step = batch.step;
  m.lambda = config.lambda_at(batch.step);

  std::vector<const RolloutRecord*> order;
  double reward_sum = 0.0;
  double entropy_sum = 0.0;
  std::size_t positions = 0;
  double abs_dhat_sum = 0.0;
  std::size_t dhat_count = 0;
  double dbar_sum = 0.0;
  std::size_t dbar_count = 0;
  for (const auto& g : batch.groups) {
    for (const auto& rec : g.rollouts) {
      order.push_back(&rec);
      reward_sum += rec.rollout.reward;
      for (std::size_t t = 0; t < rec.profile.size(); ++t) {
        entropy_sum += entropy(rec.profile.student[t]);
        ++positions;
        if (!rec.has_teacher || rec.profile.skipped[t]) continue;
        abs_dhat_sum += std::abs(rec.profile.d_hat[t]);
        ++dhat_count;
        if (std::isfinite(rec.profile.d_bar[t])) {
          dbar_sum += rec.profile.d_bar[t];
          ++dbar_count;
        }
      }
    }
  }
  m.mean_reward = order.empty() ? 0.0 : reward_sum / static_cast<double>(order.size());
  m.entropy = positions == 0 ? 0.0 : entropy_sum / static_cast<double>(positions);
  m.mean_abs_dhat = dhat_count == 0 ? 0.0 : abs_dhat_sum / static_cast<double>(dhat_count);
  m.mean_dbar = dbar_count == 0 ? 0.0 : dbar_sum / static_cast<double>(dbar_count);

  const double beta = config.scheme == Scheme::kSrpo ? config.srpo_beta : 1.0;
  const double lr = config.learning_rate_at(batch.step);
  std::size_t surrogate_tokens = 0;
  std::size_t clipped_tokens = 0;
  double norm_sum = 0.0;
  int updates = 0;

  std::vector<std::size_t> perm(order.size());
  for (int epoch = 0; epoch < config.ppo_epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, Stream::kMinibatch,
                        {static_cast<std::uint64_t>(batch.step), static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

    const std::size_t chunks = static_cast<std::size_t>(config.mini_batches);
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t begin = perm.size() * c / chunks;
      const std::size_t end = perm.size() * (c + 1) / chunks;
      std::vector<LossItem> items;
      for (std::size_t j = begin; j < end; ++j) {
        const RolloutRecord* rec = order[perm[j]];
        items.push_back(LossItem{rec, rec->credit.advantages, rec->distill, beta});
      }
      LossResult lr_result =
          policy_loss(state.params, items, config.eps_low, config.eps_high, config.distill_top_k, config.js_alpha);
      surrogate_tokens += lr_result.surrogate_tokens;
      clipped_tokens += lr_result.clipped_tokens;
      norm_sum += adamw_update(state.params, state.adam, lr_result.grad, lr, config);
      ++updates;
    }
  }
  m.clip_frac = surrogate_tokens == 0 ? 0.0
                                      : static_cast<double>(clipped_tokens) / static_cast<double>(surrogate_tokens);
  m.grad_norm = updates == 0 ? 0.0 : norm_sum / updates;
  state.step = batch.step + 1;
  return m;
}

TrainerState make_trainer_state(const TaskSpec& task, const PolicyDims& dims, std::uint64_t seed,
                                double init_scale) {
  if (dims.vocab_size != task.vocab_size || dims.horizon != task.horizon ||
      dims.prompt_arity != task.prompt_arity) {
    fail(ErrorCode::kInvalidParams, "policy dims do not match the task");
  }
  return TrainerState{PolicyParams::initialize(dims, seed, init_scale), AdamState{}, 0};
}

}  // namespace rlrt
