#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "rlrt/policy.hpp"
#include "rlrt/prob.hpp"
#include "rlrt/taskenv.hpp"

namespace rlrt {

enum class TeacherKind { kExactBayes, kContextConditioned };

/// Teacher = student conditioned on eventual success, computed by enumeration.
/// `table`, when set, must have been built for the same policy and prompt.
struct ExactBayesView {
  const TaskSpec* task = nullptr;
  const SuccessTable* table = nullptr;
};

/// Teacher = same parameters with a correct response in the context slots.
/// `mask_context` blanks those slots, which makes the teacher equal the student.
struct ContextView {
  PrivilegedContext context;
  bool mask_context = false;
};

using TeacherView = std::variant<ExactBayesView, ContextView>;

/// P_T(v) = P_S(v) f(v) / f_bar. Throws kDegenerateTeacher when f_bar == 0.
DistOverVocab exact_bayes_dist(const DistOverVocab& student, std::span<const double> f, double f_bar);

DistOverVocab context_teacher_dist(const PolicyParams& params, const History& history,
                                   const PrivilegedContext& context, bool mask_context = false);

/// First correct rollout other than `target_index`; the target itself if it is
/// the only correct one; nullopt when the group has no correct rollout.
std::optional<PrivilegedContext> pick_context(std::span<const Rollout> group, std::size_t target_index);

/// Per-position student/teacher asymmetry along one rollout (all in nats).
struct AsymmetryProfile {
  std::vector<Token> tokens;
  std::vector<double> d_hat;    ///< log P_S(y_t) - log P_T(y_t)
  std::vector<double> d_bar;    ///< KL(P_S || P_T); +inf if P_T drops student support
  std::vector<bool> skipped;    ///< degenerate teacher at this position
  std::vector<DistOverVocab> student;
  std::vector<DistOverVocab> teacher;

  std::size_t size() const { return tokens.size(); }
};

/// Teacher distribution at one history. Returns nullopt for a degenerate
/// ExactBayes position (f_bar == 0).
std::optional<DistOverVocab> teacher_dist(const PolicyEvaluator& policy, const History& history,
                                          const TeacherView& view);

AsymmetryProfile asymmetry_profile(const PolicyEvaluator& policy, const Rollout& rollout,
                                   const TeacherView& view);
AsymmetryProfile asymmetry_profile(const PolicyParams& params, const Rollout& rollout,
                                   const TeacherView& view);

}  // namespace rlrt
