#include "rlrt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>

#include "rlrt/error.hpp"

namespace rlrt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Depth-first walk over every completion. `mass[v]` accumulates the joint
// probability of the successful completions whose first token is v.
void accumulate_joint(const TaskSpec& task, const NextTokenModel& model, History& h, int remaining,
                      double joint, Token first, std::vector<double>& mass) {
  if (remaining == 0) {
    if (verify(task, h.prompt, h.tokens) == 1) mass[static_cast<std::size_t>(first)] += joint;
    return;
  }
  const DistOverVocab d = model.next_token_dist(h);
  for (Token v = 0; v < task.vocab_size; ++v) {
    h.tokens.push_back(v);
    accumulate_joint(task, model, h, remaining - 1, joint * d.probs[static_cast<std::size_t>(v)],
                     first < 0 ? v : first, mass);
    h.tokens.pop_back();
  }
}

}  // namespace

DistOverVocab posterior_teacher_dist(const TaskSpec& task, const NextTokenModel& model,
                                     const History& history) {
  const int remaining = task.horizon - response_position(task, history);
  if (remaining < 1) fail(ErrorCode::kLengthMismatch, "history is already complete");
  const std::uint64_t count = saturating_pow(static_cast<std::uint64_t>(task.vocab_size), remaining);
  if (count > task.enumeration_budget) {
    fail(ErrorCode::kBudgetExceeded, std::to_string(count) + " completions exceed budget");
  }
  std::vector<double> mass(static_cast<std::size_t>(task.vocab_size), 0.0);
  History h = history;
  accumulate_joint(task, model, h, remaining, 1.0, -1, mass);
  double z = 0.0;
  for (double m : mass) z += m;
  if (!(z > 0.0)) fail(ErrorCode::kDegenerateTeacher, "no completion succeeds");
  for (double& m : mass) m /= z;
  return DistOverVocab::from_probs(std::move(mass));
}

void TheoryReport::add(PositionTheory p) {
  if (p.skipped) {
    ++skipped;
  } else {
    if (checked == 0) min_bound_slack = p.bound_slack;
    ++checked;
    max_identity_residual = std::max(max_identity_residual, p.identity_residual);
    min_bound_slack = std::min(min_bound_slack, p.bound_slack);
    max_tilt_residual = std::max(max_tilt_residual, p.tilt_residual);
    max_route_gap = std::max(max_route_gap, p.route_gap);
  }
  positions.push_back(std::move(p));
}

bool TheoryReport::holds(double tol) const {
  // Comparisons are written so that NaN counts as a violation.
  return max_identity_residual <= tol && max_tilt_residual <= tol && min_bound_slack >= -tol;
}

PositionTheory theory_at(const DistOverVocab& student, std::span<const double> f, double f_bar,
                         const DistOverVocab& teacher) {
  const std::size_t V = student.size();
  if (f.size() != V || teacher.size() != V) fail(ErrorCode::kLengthMismatch, "vocabulary sizes differ");
  PositionTheory out;
  out.f.assign(f.begin(), f.end());
  out.f_bar = f_bar;
  for (std::size_t v = 0; v < V; ++v) out.influence += student.probs[v] * std::abs(f[v] - f_bar);
  out.tv = total_variation(student.probs, teacher.probs);
  out.kl = kl_divergence(student, teacher);
  if (std::isnan(out.kl)) out.kl = kInf;
  out.identity_residual = std::abs(out.influence - 2.0 * f_bar * out.tv);
  out.bound_slack = 2.0 * out.kl - out.influence * out.influence;

  const DistOverVocab tilt = exact_bayes_dist(student, f, f_bar);
  const double log_f_bar = std::log(f_bar);
  for (std::size_t v = 0; v < V; ++v) {
    out.route_gap = std::max(out.route_gap, std::abs(tilt.probs[v] - teacher.probs[v]));
    if (!(student.probs[v] > 0.0 && f[v] > 0.0)) continue;
    const double d_hat = student.log_probs[v] - teacher.log_probs[v];
    const double expected = log_f_bar - std::log(f[v]);
    const double r = std::abs(d_hat - expected);
    out.tilt_residual = std::isnan(r) ? kInf : std::max(out.tilt_residual, r);
  }
  return out;
}

namespace {

void check_position(const TaskSpec& task, const NextTokenModel& model, const History& h, std::size_t rollout,
                    const ProfileFault& fault, TheoryReport& report) {
  SuccessProfile sp = success_profile(task, model, h);
  if (fault) fault(sp);
  PositionTheory p;
  if (!(sp.f_bar > 0.0)) {
    p.f = sp.f;
    p.skipped = true;
  } else {
    p = theory_at(sp.student, sp.f, sp.f_bar, posterior_teacher_dist(task, model, h));
  }
  p.rollout = rollout;
  p.position = response_position(task, h);
  report.add(std::move(p));
}

}  // namespace

TheoryReport verify_theory(const PolicyEvaluator& policy, const TaskSpec& task, std::span<const Rollout> rollouts,
                           const ProfileFault& fault) {
  TheoryReport report;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    History h{rollouts[i].prompt, {}};
    for (Token y : rollouts[i].response) {
      if (response_position(task, h) >= task.horizon) break;
      if (y != task.reset_token()) check_position(task, policy, h, i, fault, report);
      h.tokens.push_back(y);
    }
  }
  return report;
}

TheoryReport theory_sweep(std::size_t n_positions, std::uint64_t seed, const ProfileFault& fault) {
  if (n_positions == 0) fail(ErrorCode::kInvalidArgs, "n_positions must be positive");
  TheoryReport report;
  const std::size_t max_draws = 20 * n_positions;
  for (std::size_t i = 0; report.checked < n_positions; ++i) {
    if (i == max_draws) fail(ErrorCode::kDegenerateTeacher, "too many degenerate positions in sweep");
    Rng rng(derive_seed(seed, Stream::kVerify, {i}));
    const auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); };

    TaskParams tp;
    tp.vocab_size = pick(2, 8);
    tp.horizon = pick(1, 5);
    tp.prompt_arity = pick(1, 4);
    const bool modular = rng.below(2) == 0;
    if (modular) {
      tp.modulus = pick(1, tp.vocab_size);
      tp.target = pick(0, tp.modulus - 1);
    } else {
      tp.hidden_set_size = pick(1, tp.vocab_size);
      tp.required_hits = pick(1, tp.horizon);
    }
    const TaskSpec task = make_task(modular ? TaskFamily::kModularSum : TaskFamily::kHiddenLexicon, tp, rng.next());

    const PolicyDims dims = PolicyDims::for_task(task, pick(1, 4), 4, 8);
    const double scale = 0.1 + 1.4 * rng.uniform();
    const PolicyEvaluator policy(snapshot(PolicyParams::initialize(dims, rng.next(), scale)));

    History h{pick(0, tp.prompt_arity - 1), {}};
    const int prefix = pick(0, tp.horizon - 1);
    for (int t = 0; t < prefix; ++t) h.tokens.push_back(pick(0, tp.vocab_size - 1));
    check_position(task, policy, h, i, fault, report);
  }
  return report;
}

// ---------------------------------------------------------------------------

MarkerCorpora marker_corpora(const PolicyEvaluator& policy, std::span<const Rollout> rollouts,
                             const std::function<TeacherView(std::size_t)>& view_for) {
  MarkerCorpora out;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const TeacherView view = view_for(i);
    History h{rollouts[i].prompt, {}};
    for (Token y : rollouts[i].response) {
      const std::optional<DistOverVocab> pt = teacher_dist(policy, h, view);
      if (!pt) {
        ++out.skipped;
      } else {
        const DistOverVocab ps = policy.next_token_dist(h);
        std::vector<double> d_hat(ps.size());
        for (std::size_t v = 0; v < ps.size(); ++v) d_hat[v] = ps.log_probs[v] - pt->log_probs[v];
        out.explore.push_back(static_cast<Token>(argmax(d_hat)));
        out.exploit.push_back(static_cast<Token>(argmin(d_hat)));
      }
      h.tokens.push_back(y);
    }
  }
  return out;
}

MarkerCorpora marker_corpora(const PolicyEvaluator& policy, std::span<const Rollout> rollouts,
                             const TeacherView& view) {
  return marker_corpora(policy, rollouts, [&](std::size_t) { return view; });
}

std::string_view to_string(MarkerVariance v) {
  return v == MarkerVariance::kMonroe ? "monroe" : "with_complements";
}

double smoothed_log_odds(double e, double x, double e_total, double x_total, double alpha) {
  return std::log((e + alpha) / (e_total - e + alpha)) - std::log((x + alpha) / (x_total - x + alpha));
}

double log_odds_variance(double e, double x, double e_total, double x_total, double alpha,
                         MarkerVariance kind) {
  double ve = 1.0 / (e + alpha);
  double vx = 1.0 / (x + alpha);
  if (kind == MarkerVariance::kWithComplements) {
    ve += 1.0 / (e_total - e + alpha);
    vx += 1.0 / (x_total - x + alpha);
  }
  return ve + vx;
}

std::vector<Token> MarkerStats::flagged() const {
  std::vector<Token> out;
  for (const auto& t : tokens) {
    if (t.flagged) out.push_back(t.token);
  }
  return out;
}

MarkerStats marker_zscores(const MarkerCorpora& corpora, double alpha, long min_count, double z_threshold,
                           MarkerVariance variance) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) fail(ErrorCode::kInvalidArgs, "alpha must be positive");
  if (corpora.explore.empty() && corpora.exploit.empty()) fail(ErrorCode::kEmptyCorpus, "both corpora are empty");
  std::map<Token, std::pair<long, long>> counts;
  for (Token t : corpora.explore) ++counts[t].first;
  for (Token t : corpora.exploit) ++counts[t].second;

  MarkerStats out;
  out.explore_total = static_cast<long>(corpora.explore.size());
  out.exploit_total = static_cast<long>(corpora.exploit.size());
  out.alpha = alpha;
  out.min_count = min_count;
  out.z_threshold = z_threshold;
  out.variance = variance;
  const auto E = static_cast<double>(out.explore_total);
  const auto X = static_cast<double>(out.exploit_total);
  for (const auto& [token, c] : counts) {
    if (c.first + c.second < min_count) continue;
    MarkerToken m;
    m.token = token;
    m.explore = c.first;
    m.exploit = c.second;
    const auto e = static_cast<double>(c.first);
    const auto x = static_cast<double>(c.second);
    m.delta = smoothed_log_odds(e, x, E, X, alpha);
    m.z = m.delta / std::sqrt(log_odds_variance(e, x, E, X, alpha, variance));
    m.flagged = std::abs(m.z) >= z_threshold;
    out.tokens.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(InjectStrategy s) {
  switch (s) {
    case InjectStrategy::kMaxKl: return "max_kl";
    case InjectStrategy::kRandom: return "random";
    case InjectStrategy::kMinKl: return "min_kl";
  }
  return "?";
}

bool is_hard_count(int n_correct, int n) { return 4 * n_correct <= n; }

bool is_easy_count(int n_correct, int n) { return 8 * n_correct >= 5 * n && n_correct < n; }

namespace {

// Candidate injection positions: those where the exact-Bayes teacher is defined.
std::vector<std::pair<int, double>> kl_by_position(const SuccessTable& table, const Rollout& r) {
  std::vector<std::pair<int, double>> out;
  for (std::size_t t = 0; t < r.response.size(); ++t) {
    const SuccessProfile sp = table.profile(std::span<const Token>(r.response).first(t));
    if (!(sp.f_bar > 0.0)) continue;
    double kl = kl_divergence(sp.student, exact_bayes_dist(sp.student, sp.f, sp.f_bar));
    if (std::isnan(kl)) kl = kInf;
    out.emplace_back(static_cast<int>(t), kl);
  }
  return out;
}

}  // namespace

int inject_and_resample(const PolicyEvaluator& policy, const TaskSpec& task, const Rollout& rollout, int position,
                        int n, Rng& rng) {
  if (position < 0 || position >= static_cast<int>(rollout.response.size())) {
    fail(ErrorCode::kInvalidArgs, "injection position outside the response");
  }
  History h{rollout.prompt, std::vector<Token>(rollout.response.begin(), rollout.response.begin() + position)};
  h.tokens.push_back(task.reset_token());
  int flips = 0;
  for (int c = 0; c < n; ++c) {
    const std::vector<Token> full = sample_completion(policy, task, h, 1.0, rng);
    if (verify(task, rollout.prompt, full) != rollout.reward) ++flips;
  }
  return flips;
}

InterventionResult intervene(const PolicyEvaluator& policy, const TaskSpec& task, std::span<const int> prompts,
                             std::span<const InjectStrategy> strategies, int n_rollouts, int n_continuations,
                             std::uint64_t seed) {
  if (n_rollouts < 2) fail(ErrorCode::kInvalidArgs, "n_rollouts must be >= 2");
  if (n_continuations < 1) fail(ErrorCode::kInvalidArgs, "n_continuations must be >= 1");
  if (strategies.empty()) fail(ErrorCode::kInvalidArgs, "no strategies given");

  InterventionResult out;
  for (InjectStrategy s : strategies) out.rates.push_back(StrategyRates{s});

  for (int prompt : prompts) {
    if (prompt < 0 || prompt >= task.prompt_arity) fail(ErrorCode::kInvalidArgs, "prompt id out of range");
    const auto p = static_cast<std::uint64_t>(prompt);
    std::vector<Rollout> group;
    int n_correct = 0;
    for (int k = 0; k < n_rollouts; ++k) {
      Rng rng(derive_seed(seed, Stream::kIntervention, {p, 0, static_cast<std::uint64_t>(k)}));
      group.push_back(sample_rollout(policy, task, prompt, 1.0, rng));
      n_correct += group.back().reward;
    }
    const bool hard = is_hard_count(n_correct, n_rollouts);
    const bool easy = is_easy_count(n_correct, n_rollouts);
    if (!hard && !easy) continue;
    (hard ? out.hard_prompts : out.easy_prompts).push_back(prompt);

    const SuccessTable table(task, policy, prompt);
    for (std::size_t k = 0; k < group.size(); ++k) {
      const Rollout& r = group[k];
      if (r.reward != (hard ? 0 : 1)) continue;
      const auto kl = kl_by_position(table, r);
      if (kl.empty()) continue;
      for (std::size_t si = 0; si < strategies.size(); ++si) {
        const InjectStrategy s = strategies[si];
        Rng rng(derive_seed(seed, Stream::kIntervention, {p, 1 + k, si}));
        int position = 0;
        if (s == InjectStrategy::kRandom) {
          position = static_cast<int>(rng.below(static_cast<std::uint64_t>(task.horizon)));
        } else {
          auto best = kl.front();
          for (const auto& c : kl) {
            if (s == InjectStrategy::kMaxKl ? c.second > best.second : c.second < best.second) best = c;
          }
          position = best.first;
        }
        InterventionSample sample{prompt, k, s, hard, position, 0, n_continuations};
        sample.flips = inject_and_resample(policy, task, r, position, n_continuations, rng);
        StrategyRates& rate = out.rates[si];
        (hard ? rate.hard_flips : rate.easy_flips) += sample.flips;
        (hard ? rate.hard_trials : rate.easy_trials) += sample.trials;
        out.samples.push_back(sample);
      }
    }
  }
  if (out.hard_prompts.empty() && out.easy_prompts.empty()) {
    fail(ErrorCode::kNoEligiblePrompts, "no prompt fell into the hard or easy subset");
  }
  for (StrategyRates& r : out.rates) {
    r.flip_to_right = r.hard_trials > 0 ? static_cast<double>(r.hard_flips) / static_cast<double>(r.hard_trials) : 0.0;
    r.flip_to_wrong = r.easy_trials > 0 ? static_cast<double>(r.easy_flips) / static_cast<double>(r.easy_trials) : 0.0;
  }
  return out;
}

double sign_test_p_value(long wins, long trials) {
  if (trials < 0 || wins < 0 || wins > trials) fail(ErrorCode::kInvalidArgs, "need 0 <= wins <= trials");
  if (wins == 0) return 1.0;
  // P[Bin(n, 1/2) >= wins], summed from the largest term down in log space.
  const auto n = static_cast<double>(trials);
  std::vector<double> logs;
  for (long i = wins; i <= trials; ++i) {
    const auto k = static_cast<double>(i);
    logs.push_back(std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1) - n * std::numbers::ln2);
  }
  const double top = *std::max_element(logs.begin(), logs.end());
  double s = 0.0;
  for (double l : logs) s += std::exp(l - top);
  return std::min(1.0, std::exp(top + std::log(s)));
}

PairedComparison compare_strategies(const InterventionResult& result, InjectStrategy a, InjectStrategy b) {
  std::map<std::pair<int, std::size_t>, std::pair<int, int>> flips;
  std::map<std::pair<int, std::size_t>, int> seen;
  for (const auto& s : result.samples) {
    if (!s.hard || (s.strategy != a && s.strategy != b)) continue;
    auto& f = flips[{s.prompt, s.rollout}];
    (s.strategy == a ? f.first : f.second) = s.flips;
    ++seen[{s.prompt, s.rollout}];
  }
  PairedComparison out;
  for (const auto& [key, f] : flips) {
    if (seen[key] != 2) continue;
    if (f.first > f.second) {
      ++out.wins;
    } else if (f.first < f.second) {
      ++out.losses;
    } else {
      ++out.ties;
    }
  }
  out.p_value = sign_test_p_value(out.wins, out.wins + out.losses);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> default_ccdf_thresholds() {
  std::vector<double> t(50);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::numbers::ln2 * static_cast<double>(i) / 49.0;
  return t;
}

ShiftReport shift_report(const PolicyEvaluator& ft, const PolicyEvaluator& base, std::span<const Rollout> rollouts,
                         const ShiftOptions& options) {
  if (!(ft.params().dims() == base.params().dims())) fail(ErrorCode::kInvalidArgs, "policy shapes differ");
  const int V = ft.params().dims().vocab_size;
  for (int k : options.k_list) {
    if (k < 1 || k > V) fail(ErrorCode::kInvalidArgs, "top-k size must be in [1, V]");
  }
  ShiftReport out;
  out.js_threshold = options.js_threshold;
  out.threshold_in_bits = options.threshold_in_bits;
  out.k_list = options.k_list;
  out.tail_thresholds = options.tail_thresholds;
  out.ccdf_thresholds = options.ccdf_thresholds.empty() ? default_ccdf_thresholds() : options.ccdf_thresholds;
  std::sort(out.ccdf_thresholds.begin(), out.ccdf_thresholds.end());

  const double unit = options.threshold_in_bits ? std::numbers::ln2 : 1.0;
  std::vector<double> overlap_all(out.k_list.size(), 0.0);
  std::vector<double> overlap_high(out.k_list.size(), 0.0);
  std::vector<long> tail(out.tail_thresholds.size(), 0);

  for (const Rollout& r : rollouts) {
    History h{r.prompt, {}};
    for (Token y : r.response) {
      const DistOverVocab pf = ft.next_token_dist(h);
      const DistOverVocab pb = base.next_token_dist(h);
      const double js = std::clamp(js_divergence(pf.probs, pb.probs), 0.0, std::numbers::ln2);
      const bool high = js / unit > options.js_threshold;
      if (high) out.high_divergence.push_back(out.js.size());
      out.js.push_back(js);
      for (std::size_t i = 0; i < out.k_list.size(); ++i) {
        const auto k = static_cast<std::size_t>(out.k_list[i]);
        auto a = top_k_indices(pf.probs, k);
        auto b = top_k_indices(pb.probs, k);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        std::vector<std::size_t> both;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
        const double o = static_cast<double>(both.size()) / static_cast<double>(k);
        overlap_all[i] += o;
        if (high) overlap_high[i] += o;
      }
      if (high) {
        const double base_p = pb.probs[argmax(pf.probs)];
        for (std::size_t i = 0; i < tail.size(); ++i) {
          if (base_p < out.tail_thresholds[i]) ++tail[i];
        }
      }
      h.tokens.push_back(y);
    }
  }

  const auto n = static_cast<double>(out.js.size());
  const auto n_high = static_cast<double>(out.high_divergence.size());
  for (std::size_t i = 0; i < out.k_list.size(); ++i) {
    out.topk_overlap_all.push_back(n > 0 ? overlap_all[i] / n : std::numeric_limits<double>::quiet_NaN());
    out.topk_overlap_high.push_back(n_high > 0 ? overlap_high[i] / n_high : std::numeric_limits<double>::quiet_NaN());
  }
  for (long c : tail) out.tail_promotion.push_back(n_high > 0 ? static_cast<double>(c) / n_high : 0.0);
  for (double t : out.ccdf_thresholds) {
    const auto above = std::count_if(out.js.begin(), out.js.end(), [&](double j) { return j > t; });
    out.ccdf.push_back(n > 0 ? static_cast<double>(above) / n : 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------

double pass_at_k(long n, long c, long k) {
  if (n < 1 || c < 0 || c > n || k < 1 || k > n) {
    fail(ErrorCode::kInvalidArgs, "pass@k needs 0 <= c <= n and 1 <= k <= n");
  }
  if (n - c < k) return 1.0;
  // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k/i)
  double log_ratio = 0.0;
  for (long i = n - c + 1; i <= n; ++i) log_ratio += std::log1p(-static_cast<double>(k) / static_cast<double>(i));
  return -std::expm1(log_ratio);
}

}  // namespace rlrt
