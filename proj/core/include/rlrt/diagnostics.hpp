#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "rlrt/policy.hpp"
#include "rlrt/taskenv.hpp"
#include "rlrt/teacher.hpp"

namespace rlrt {

// ---------------------------------------------------------------------------
// Theory checks

/// P(v | history, R=1) by summing the joint probability of every successful
/// completion that starts with v. Independent of the tilt formula in
/// exact_bayes_dist. Throws kDegenerateTeacher if no completion succeeds.
DistOverVocab posterior_teacher_dist(const TaskSpec& task, const NextTokenModel& model,
                                     const History& history);

/// Theory quantities at one position.
struct PositionTheory {
  std::size_t rollout = 0;
  int position = 0;
  std::vector<double> f;
  double f_bar = 0.0;
  double influence = 0.0;           ///< sum_v P_S(v) |f(v) - f_bar|
  double tv = 0.0;                  ///< TV(P_S, P_T)
  double kl = 0.0;                  ///< KL(P_S || P_T), may be +inf
  double identity_residual = 0.0;   ///< |Inf - 2 f_bar TV|
  double bound_slack = 0.0;         ///< 2 KL - Inf^2
  double tilt_residual = 0.0;      ///< max_v |D_hat(v) - (log f_bar - log f(v))|
  double route_gap = 0.0;           ///< max_v |P_T tilt - P_T posterior|
  bool skipped = false;             ///< f_bar == 0
};

struct TheoryReport {
  std::vector<PositionTheory> positions;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_identity_residual = 0.0;
  double min_bound_slack = 0.0;
  double max_tilt_residual = 0.0;
  double max_route_gap = 0.0;

  void add(PositionTheory p);
  bool holds(double tol = 1e-9) const;
};

/// Test hook: lets a caller corrupt the success profile before it is used.
using ProfileFault = std::function<void(SuccessProfile&)>;

/// Theory quantities from a student distribution, per-token success
/// probabilities f, and a teacher distribution (any route).
PositionTheory theory_at(const DistOverVocab& student, std::span<const double> f, double f_bar,
                         const DistOverVocab& teacher);

/// Exact f by enumeration and P_T by joint posterior enumeration at every
/// position of every rollout, then the tilt identity, Inf = 2 f_bar TV and Inf^2 <= 2 KL.
TheoryReport verify_theory(const PolicyEvaluator& policy, const TaskSpec& task,
                           std::span<const Rollout> rollouts, const ProfileFault& fault = {});

/// Random tasks, random parameters and random histories: `n_positions` checks.
TheoryReport theory_sweep(std::size_t n_positions, std::uint64_t seed, const ProfileFault& fault = {});

// ---------------------------------------------------------------------------
// Explore/exploit marker statistics

struct MarkerCorpora {
  std::vector<Token> explore;  ///< argmax_v D_hat(v) per position
  std::vector<Token> exploit;  ///< argmin_v D_hat(v) per position
  std::size_t skipped = 0;
};

/// One pair of corpus entries per non-degenerate position; the teacher view
/// for rollout i is `view_for(i)`.
MarkerCorpora marker_corpora(const PolicyEvaluator& policy, std::span<const Rollout> rollouts,
                             const std::function<TeacherView(std::size_t)>& view_for);
MarkerCorpora marker_corpora(const PolicyEvaluator& policy, std::span<const Rollout> rollouts,
                             const TeacherView& view);

enum class MarkerVariance {
  kMonroe,           ///< 1/(e+a) + 1/(x+a)
  kWithComplements,  ///< adds 1/(E-e+a) + 1/(X-x+a)
};

std::string_view to_string(MarkerVariance v);

double smoothed_log_odds(double e, double x, double e_total, double x_total, double alpha);
double log_odds_variance(double e, double x, double e_total, double x_total, double alpha,
                         MarkerVariance kind);

struct MarkerToken {
  Token token = 0;
  long explore = 0;
  long exploit = 0;
  double delta = 0.0;
  double z = 0.0;
  bool flagged = false;
};

struct MarkerStats {
  std::vector<MarkerToken> tokens;  ///< tokens meeting min_count, ascending id
  long explore_total = 0;
  long exploit_total = 0;
  double alpha = 0.5;
  long min_count = 30;
  double z_threshold = 3.0;
  MarkerVariance variance = MarkerVariance::kMonroe;

  std::vector<Token> flagged() const;
};

MarkerStats marker_zscores(const MarkerCorpora& corpora, double alpha = 0.5, long min_count = 30,
                           double z_threshold = 3.0, MarkerVariance variance = MarkerVariance::kMonroe);

// ---------------------------------------------------------------------------
// Reflection-injection intervention

enum class InjectStrategy { kMaxKl, kRandom, kMinKl };
std::string_view to_string(InjectStrategy s);

struct InterventionSample {
  int prompt = 0;
  std::size_t rollout = 0;
  InjectStrategy strategy = InjectStrategy::kMaxKl;
  bool hard = false;     ///< hard subset (wrong rollout) vs easy subset (right rollout)
  int position = 0;
  int flips = 0;
  int trials = 0;
};

struct StrategyRates {
  InjectStrategy strategy = InjectStrategy::kMaxKl;
  double flip_to_right = 0.0;  ///< wrong -> right on the hard subset
  double flip_to_wrong = 0.0;  ///< right -> wrong on the easy subset
  long hard_flips = 0;
  long hard_trials = 0;
  long easy_flips = 0;
  long easy_trials = 0;
};

struct InterventionResult {
  std::vector<StrategyRates> rates;
  std::vector<InterventionSample> samples;
  std::vector<int> hard_prompts;
  std::vector<int> easy_prompts;
};

/// Hard prompts: n_correct <= n/4 ({0,1,2} of 8). Easy: ceil(5n/8) <= n_correct < n ({5,6,7} of 8).
bool is_hard_count(int n_correct, int n);
bool is_easy_count(int n_correct, int n);

/// Inserts RESET after the first `position` tokens of `rollout`, resamples the
/// remaining ordinary tokens `n` times and counts outcomes whose reward
/// differs from the rollout's.
int inject_and_resample(const PolicyEvaluator& policy, const TaskSpec& task, const Rollout& rollout, int position,
                        int n, Rng& rng);

/// For each prompt: sample n_rollouts, classify, then for every wrong rollout
/// of a hard prompt (right rollout of an easy prompt) insert RESET at the
/// strategy's position and resample the suffix n_continuations times.
/// Positions are ranked by the exact-Bayes KL, so the task must be enumerable.
InterventionResult intervene(const PolicyEvaluator& policy, const TaskSpec& task, std::span<const int> prompts,
                             std::span<const InjectStrategy> strategies, int n_rollouts, int n_continuations,
                             std::uint64_t seed);

/// One-sided sign test: p-value of at least `wins` successes in `trials` fair coin flips.
double sign_test_p_value(long wins, long trials);

/// Paired comparison of two strategies on the hard subset: per rollout,
/// `a` wins when it flips more continuations than `b`. Ties are dropped.
struct PairedComparison {
  long wins = 0;
  long losses = 0;
  long ties = 0;
  double p_value = 1.0;
};

PairedComparison compare_strategies(const InterventionResult& result, InjectStrategy a, InjectStrategy b);

// ---------------------------------------------------------------------------
// Distribution shift between a fine-tuned and a base policy

struct ShiftOptions {
  double js_threshold = 0.1;
  bool threshold_in_bits = false;          ///< compare JS / ln 2 against the threshold
  std::vector<int> k_list = {1, 2, 4};
  std::vector<double> tail_thresholds = {0.01, 0.05, 0.1};
  std::vector<double> ccdf_thresholds;     ///< empty: default_ccdf_thresholds()
};

struct ShiftReport {
  std::vector<double> js;                     ///< per position in nats, rollout-major
  std::vector<double> ccdf_thresholds;        ///< ascending, nats
  std::vector<double> ccdf;                   ///< fraction of positions with JS > threshold
  double js_threshold = 0.1;
  bool threshold_in_bits = false;
  std::vector<std::size_t> high_divergence;   ///< indices into js
  std::vector<int> k_list;
  std::vector<double> topk_overlap_all;       ///< mean over all positions
  std::vector<double> topk_overlap_high;      ///< mean over high-divergence positions, NaN if none
  std::vector<double> tail_thresholds;
  std::vector<double> tail_promotion;         ///< fraction of high-divergence positions, 0 if none
};

ShiftReport shift_report(const PolicyEvaluator& ft, const PolicyEvaluator& base, std::span<const Rollout> rollouts,
                         const ShiftOptions& options = {});

/// 50 evenly spaced thresholds on [0, ln 2].
std::vector<double> default_ccdf_thresholds();

// ---------------------------------------------------------------------------

/// Unbiased pass@k: 1 - C(n-c, k) / C(n, k), evaluated in log space.
double pass_at_k(long n, long c, long k);

}  // namespace rlrt
