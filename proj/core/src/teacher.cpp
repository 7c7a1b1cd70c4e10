#include "rlrt/teacher.hpp"

#include <cmath>
#include <limits>

#include "rlrt/error.hpp"

namespace rlrt {

DistOverVocab exact_bayes_dist(const DistOverVocab& student, std::span<const double> f, double f_bar) {
  if (f.size() != student.size()) fail(ErrorCode::kLengthMismatch, "f must have one entry per token");
  if (!(f_bar > 0.0)) fail(ErrorCode::kDegenerateTeacher, "no correct continuation (f_bar == 0)");
  double mean = 0.0;
  for (std::size_t v = 0; v < f.size(); ++v) {
    // Enumerated sums of probabilities can overshoot 1 by a few ulp.
    if (!(f[v] >= 0.0 && f[v] <= 1.0 + 1e-12)) fail(ErrorCode::kInvalidArgs, "f outside [0, 1]");
    mean += student.probs[v] * f[v];
  }
  if (std::abs(mean - f_bar) > 1e-9) fail(ErrorCode::kInvalidArgs, "f_bar is not the student mean of f");
  std::vector<double> p(f.size());
  for (std::size_t v = 0; v < f.size(); ++v) p[v] = student.probs[v] * f[v] / f_bar;
  return DistOverVocab::from_probs(std::move(p));
}

DistOverVocab context_teacher_dist(const PolicyParams& params, const History& history,
                                   const PrivilegedContext& context, bool mask_context) {
  return next_token_dist(params, history, mask_context ? nullptr : &context);
}

std::optional<PrivilegedContext> pick_context(std::span<const Rollout> group, std::size_t target_index) {
  std::optional<std::size_t> self;
  for (std::size_t k = 0; k < group.size(); ++k) {
    if (group[k].reward != 1) continue;
    if (k != target_index) return PrivilegedContext{group[k].response};
    self = k;
  }
  if (self) return PrivilegedContext{group[*self].response};
  return std::nullopt;
}

std::optional<DistOverVocab> teacher_dist(const PolicyEvaluator& policy, const History& history,
                                          const TeacherView& view) {
  if (const auto* ctx = std::get_if<ContextView>(&view)) {
    return policy.dist(history, ctx->mask_context ? nullptr : &ctx->context);
  }
  const auto& eb = std::get<ExactBayesView>(view);
  if (eb.task == nullptr) fail(ErrorCode::kInvalidArgs, "ExactBayes view needs a task");
  const SuccessProfile sp =
      eb.table != nullptr ? eb.table->profile(history.tokens) : success_profile(*eb.task, policy, history);
  if (!(sp.f_bar > 0.0)) return std::nullopt;
  return exact_bayes_dist(sp.student, sp.f, sp.f_bar);
}

AsymmetryProfile asymmetry_profile(const PolicyEvaluator& policy, const Rollout& rollout,
                                   const TeacherView& view) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  AsymmetryProfile out;
  History h{rollout.prompt, {}};
  for (Token y : rollout.response) {
    DistOverVocab ps = policy.next_token_dist(h);
    std::optional<DistOverVocab> pt = teacher_dist(policy, h, view);
    const auto yi = static_cast<std::size_t>(y);
    bool skip = !pt.has_value();
    double d_hat = 0.0;
    double d_bar = 0.0;
    if (pt) {
      if (pt->probs[yi] == 0.0) {
        skip = true;  // f(y_t) == 0: log-ratio undefined
      } else {
        d_hat = ps.log_probs[yi] - pt->log_probs[yi];
      }
      d_bar = kl_divergence(ps, *pt);
    } else {
      pt = ps;
    }
    if (std::isnan(d_bar)) d_bar = kInf;
    out.tokens.push_back(y);
    out.d_hat.push_back(d_hat);
    out.d_bar.push_back(d_bar);
    out.skipped.push_back(skip);
    out.student.push_back(std::move(ps));
    out.teacher.push_back(std::move(*pt));
    h.tokens.push_back(y);
  }
  return out;
}

AsymmetryProfile asymmetry_profile(const PolicyParams& params, const Rollout& rollout,
                                   const TeacherView& view) {
  return asymmetry_profile(PolicyEvaluator(snapshot(params)), rollout, view);
}

}  // namespace rlrt
