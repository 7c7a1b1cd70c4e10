// Acceptance runner: one PASS/FAIL line per criterion.
// Usage: rlrt_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rlrt/config.hpp"
#include "rlrt/credit.hpp"
#include "rlrt/diagnostics.hpp"
#include "rlrt/experiment.hpp"
#include "rlrt/trainer.hpp"

using namespace rlrt;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Norm-wise relative error between two gradient vectors.
double rel_error(const std::vector<double>& fd, const std::vector<double>& g) {
  double num = 0.0;
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    num += (fd[i] - g[i]) * (fd[i] - g[i]);
    a += fd[i] * fd[i];
    b += g[i] * g[i];
  }
  return std::sqrt(num) / std::max({std::sqrt(a), std::sqrt(b), 1e-12});
}

std::vector<double> coordinate_fd(const std::function<double(const std::vector<double>&)>& fn,
                                  const std::vector<double>& x, double h) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<double> e(x.size(), 0.0);
    e[i] = 1.0;
    out[i] = oracle::directional_fd(fn, x, e, h);
  }
  return out;
}

// Shared sweep for the first two criteria.
struct SweepResult {
  TheoryReport report;
  double seconds = 0.0;
};

const SweepResult& theory_sweep_once() {
  static const SweepResult r = [] {
    const auto t0 = std::chrono::steady_clock::now();
    SweepResult s;
    s.report = theory_sweep(1000, 1);
    s.seconds = seconds_since(t0);
    return s;
  }();
  return r;
}

Outcome tilt_identity() {
  const SweepResult& s = theory_sweep_once();
  const bool ok = s.report.checked >= 1000 && s.report.max_tilt_residual <= 1e-9 && s.seconds <= 60.0;
  return {ok, fmt("%zu positions (%zu degenerate skipped), max |D_hat - (log f_bar - log f)| = %.3g, "
                  "max tilt/posterior gap = %.3g, %.1f s",
                  s.report.checked, s.report.skipped, s.report.max_tilt_residual, s.report.max_route_gap,
                  s.seconds)};
}

Outcome influence_bounds() {
  const SweepResult& s = theory_sweep_once();
  const bool ok = s.report.checked >= 1000 && s.report.min_bound_slack >= -1e-9 &&
                  s.report.max_identity_residual <= 1e-9 && s.seconds <= 60.0;
  return {ok, fmt("%zu positions, min (2 KL - Inf^2) = %.3g, max |Inf - 2 f_bar TV| = %.3g, %.1f s",
                  s.report.checked, s.report.min_bound_slack, s.report.max_identity_residual, s.seconds)};
}

Outcome reduction_identity() {
  RunConfig rc = default_run_config();
  rc.seed = 1;
  rc.train.normalize_std = true;
  const TaskSpec task = rc.make_task();
  TrainConfig grpo = rc.train_config();
  grpo.scheme = Scheme::kGrpo;
  TrainConfig rlrt = rc.train_config();
  rlrt.scheme = Scheme::kRlrt;
  rlrt.lambda_init = 0.0;
  TrainerState a = initial_state(rc);
  TrainerState b = initial_state(rc);
  int identical = 0;
  for (int s = 0; s < 50; ++s) {
    advance(a, task, grpo);
    advance(b, task, rlrt);
    if (!std::equal(a.params.values().begin(), a.params.values().end(), b.params.values().begin())) break;
    ++identical;
  }
  return {identical == 50, fmt("parameters bitwise identical after %d of 50 steps (advantage std normalization "
                               "on for both)",
                               identical)};
}

Outcome reciprocity() {
  Rng rng(4);
  const double ulp = std::numeric_limits<double>::epsilon();
  long pairs = 0;
  long within = 0;
  long bitwise_one = 0;
  long symmetric = 0;
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double d = (rng.uniform() - 0.5) * 20.0;
    const int s = static_cast<int>(rng.below(3)) - 1;
    const double p = rlrt_weight(d, s) * rlsd_weight(d, s);
    ++pairs;
    worst = std::max(worst, std::abs(p - 1.0) / ulp);
    if (std::abs(p - 1.0) <= ulp) ++within;
    if (p == 1.0) ++bitwise_one;
    if (rlrt_weight(d, s) == rlsd_weight(-d, s)) ++symmetric;
  }
  return {within == pairs && symmetric == pairs,
          fmt("%ld pairs: product within 1 ulp of 1 for %ld (bitwise 1.0 for %ld, worst %.0f ulp); "
              "rlrt(d,s) == rlsd(-d,s) bitwise for %ld",
              pairs, within, bitwise_one, worst, symmetric)};
}

Outcome bounded_perturbation() {
  RunConfig rc = default_run_config();
  rc.train.scheme = Scheme::kRlrt;
  const TaskSpec task = rc.make_task();
  const TrainConfig cfg = rc.train_config();
  TrainerState state = initial_state(rc);
  double worst_excess = -std::numeric_limits<double>::infinity();
  long tokens = 0;
  long gate_violations = 0;
  long modulated = 0;
  for (int s = 0; s < 100; ++s) {
    Batch batch;
    advance(state, task, cfg, &batch);
    const double bound_scale = cfg.lambda_at(s) * cfg.eps_w;
    for (const auto& g : batch.groups) {
      for (const auto& rec : g.rollouts) {
        const double a = rec.group_advantage;
        for (double at : rec.credit.advantages) {
          ++tokens;
          worst_excess = std::max(worst_excess, std::abs(at - a) - std::abs(a) * bound_scale);
          if (rec.rollout.reward == 0 && at != a) ++gate_violations;
          if (at != a) ++modulated;
        }
      }
    }
  }
  return {worst_excess <= 1e-12 && gate_violations == 0,
          fmt("%ld tokens over 100 steps: max(|A_t - A| - |A| lambda eps_w) = %.3g, reward-0 tokens with A_t != A: "
              "%ld, modulated tokens: %ld",
              tokens, worst_excess, gate_violations, modulated)};
}

Outcome gradient_checks() {
  TaskParams tp;
  tp.vocab_size = 5;
  tp.horizon = 3;
  tp.prompt_arity = 2;
  tp.modulus = 4;
  tp.target = 1;
  const TaskSpec task = make_task(TaskFamily::kModularSum, tp, 6);
  const PolicyDims dims = PolicyDims::for_task(task, 3, 4, 6);
  Rng rng(6);

  // Policy log-probability, alternating student and teacher views.
  double worst_policy = 0.0;
  for (int i = 0; i < 100; ++i) {
    const PolicyParams p = PolicyParams::initialize(dims, rng.next(), 0.3 + rng.uniform());
    History h{static_cast<int>(rng.below(2)), {}};
    const int len = static_cast<int>(rng.below(3));
    for (int t = 0; t < len; ++t) h.tokens.push_back(static_cast<Token>(rng.below(5)));
    PrivilegedContext ctx;
    for (int t = 0; t < 3; ++t) ctx.tokens.push_back(static_cast<Token>(rng.below(5)));
    const PrivilegedContext* c = i % 2 == 0 ? &ctx : nullptr;
    const Token y = static_cast<Token>(rng.below(5));
    const LogProbGrad g = logprob_grad(p, h, y, c);
    const std::vector<double> x(p.values().begin(), p.values().end());
    const auto fd = coordinate_fd(
        [&](const std::vector<double>& v) {
          return next_token_dist(oracle::with_values(p, v), h, c).log_probs[static_cast<std::size_t>(y)];
        },
        x, 1e-5);
    worst_policy = std::max(worst_policy, rel_error(fd, g.grad));
  }

  // Distillation loss with respect to student logits.
  double worst_distill = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> zt(8);
    std::vector<double> zs(8);
    for (std::size_t v = 0; v < 8; ++v) {
      zt[v] = rng.uniform() * 4 - 2;
      zs[v] = rng.uniform() * 4 - 2;
    }
    const auto teacher = DistOverVocab::from_logits(zt);
    const std::size_t top_k = i % 2 == 0 ? 0 : 4;
    const auto g = sdpo_distill_loss(teacher, DistOverVocab::from_logits(zs), top_k, 0.5).grad_logits;
    const auto fd = coordinate_fd(
        [&](const std::vector<double>& z) {
          return sdpo_distill_loss(teacher, DistOverVocab::from_logits(z), top_k, 0.5).loss;
        },
        zs, 1e-6);
    worst_distill = std::max(worst_distill, rel_error(fd, g));
  }

  // Full loss over a two-prompt micro-batch, off-policy so the ratios move.
  double worst_surrogate = 0.0;
  const Scheme schemes[] = {Scheme::kGrpo, Scheme::kRlrt, Scheme::kRlsd, Scheme::kSrpo, Scheme::kSdpo};
  for (int i = 0; i < 100; ++i) {
    const PolicyParams p = PolicyParams::initialize(dims, rng.next(), 0.6);
    TrainConfig cfg;
    cfg.scheme = schemes[i % 5];
    cfg.group_size = 4;
    cfg.prompts_per_batch = 2;
    cfg.seed = rng.next();
    const PolicyEvaluator ev(snapshot(p));
    Batch b = collect_batch(ev, task, cfg, i);
    assign_credit(b, cfg);
    std::vector<LossItem> items;
    for (auto& g : b.groups) {
      for (auto& r : g.rollouts) {
        for (double& lp : r.rollout.student_logprobs) lp += 0.15 * (rng.uniform() - 0.5);
        items.push_back(LossItem{&r, r.credit.advantages, r.distill, 1.0});
      }
    }
    const LossResult l = policy_loss(p, items, 0.2, 0.28, 0, 0.5);
    const std::vector<double> x(p.values().begin(), p.values().end());
    const auto fd = coordinate_fd(
        [&](const std::vector<double>& v) { return policy_loss(oracle::with_values(p, v), items, 0.2, 0.28, 0, 0.5).loss; },
        x, 1e-5);
    worst_surrogate = std::max(worst_surrogate, rel_error(fd, l.grad));
  }

  const bool ok = worst_policy <= 1e-4 && worst_distill <= 1e-4 && worst_surrogate <= 1e-4;
  return {ok, fmt("max relative error over 100 instances each: log-prob %.2g, distill %.2g, surrogate %.2g",
                  worst_policy, worst_distill, worst_surrogate)};
}

Outcome training_analog() {
  const auto t0 = std::chrono::steady_clock::now();
  double final_reward[2] = {0.0, 0.0};
  double mid_reward[2] = {0.0, 0.0};
  const Scheme schemes[2] = {Scheme::kGrpo, Scheme::kRlrt};
  std::string per_seed;
  for (int si = 0; si < 2; ++si) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      RunConfig rc = default_run_config();
      rc.seed = seed;
      rc.train.scheme = schemes[si];
      const TaskSpec task = rc.make_task();
      const TrainConfig cfg = rc.train_config();
      TrainerState state = initial_state(rc);
      for (int s = 0; s < 300; ++s) {
        const StepMetrics m = advance(state, task, cfg);
        if (s == 150) mid_reward[si] += m.mean_reward / 5.0;
        if (s == 299) {
          final_reward[si] += m.mean_reward / 5.0;
          per_seed += fmt(" %.3f", m.mean_reward);
        }
      }
    }
    if (si == 0) per_seed += " |";
  }
  const double secs = seconds_since(t0);
  const bool ok = final_reward[1] >= final_reward[0] - 0.01 && mid_reward[1] >= mid_reward[0] && secs <= 900.0;
  return {ok, fmt("final reward GRPO %.4f vs RLRT %.4f; step 150 GRPO %.4f vs RLRT %.4f; per seed (GRPO | RLRT):%s; "
                  "%.0f s",
                  final_reward[0], final_reward[1], mid_reward[0], mid_reward[1], per_seed.c_str(), secs)};
}

Outcome intervention_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig rc = default_run_config();
  rc.task.prompt_arity = 80;
  const TaskSpec task = rc.make_task();
  const PolicyEvaluator policy(snapshot(initial_state(rc).params));
  std::vector<int> prompts(80);
  for (int i = 0; i < 80; ++i) prompts[static_cast<std::size_t>(i)] = i;
  const std::vector<InjectStrategy> strategies{InjectStrategy::kMaxKl, InjectStrategy::kRandom, InjectStrategy::kMinKl};
  const InterventionResult r = intervene(policy, task, prompts, strategies, 8, 32, rc.seed);
  const PairedComparison c = compare_strategies(r, InjectStrategy::kMaxKl, InjectStrategy::kMinKl);
  const double secs = seconds_since(t0);
  const bool ok = r.hard_prompts.size() >= 50 && r.rates[0].flip_to_right > r.rates[2].flip_to_right &&
                  c.p_value < 0.05 && secs <= 300.0;
  return {ok, fmt("%zu hard prompts; flip->R max_kl %.4f, random %.4f, min_kl %.4f; paired sign test max_kl vs "
                  "min_kl: %ld wins, %ld losses, %ld ties, one-sided p = %.3g; %.0f s",
                  r.hard_prompts.size(), r.rates[0].flip_to_right, r.rates[1].flip_to_right,
                  r.rates[2].flip_to_right, c.wins, c.losses, c.ties, c.p_value, secs)};
}

Outcome marker_fixture() {
  MarkerCorpora c;
  c.explore.assign(30, 0);
  c.explore.insert(c.explore.end(), 970, 1);
  c.exploit.assign(1000, 1);
  const MarkerStats s = marker_zscores(c, 0.5, 30, 3.0);
  const double z = s.tokens.empty() ? std::nan("") : s.tokens.front().z;

  Rng rng(9);
  MarkerCorpora r;
  for (int i = 0; i < 5000; ++i) r.explore.push_back(static_cast<Token>(rng.below(8)));
  for (int i = 0; i < 4000; ++i) r.exploit.push_back(static_cast<Token>(std::min<std::uint64_t>(rng.below(10), 7)));
  const MarkerCorpora swapped{r.exploit, r.explore, 0};
  long tokens = 0;
  long exact = 0;
  for (MarkerVariance v : {MarkerVariance::kMonroe, MarkerVariance::kWithComplements}) {
    const MarkerStats a = marker_zscores(r, 0.5, 30, 3.0, v);
    const MarkerStats b = marker_zscores(swapped, 0.5, 30, 3.0, v);
    for (std::size_t i = 0; i < a.tokens.size() && i < b.tokens.size(); ++i) {
      ++tokens;
      if (a.tokens[i].delta == -b.tokens[i].delta && a.tokens[i].z == -b.tokens[i].z) ++exact;
    }
  }
  const bool ok = std::abs(z - 2.905) <= 1e-3 && tokens > 0 && exact == tokens;
  return {ok, fmt("fixture z = %.5f (delta %.5f); corpus swap negates delta and z exactly for %ld of %ld tokens", z,
                  s.tokens.empty() ? std::nan("") : s.tokens.front().delta, exact, tokens)};
}

Outcome passk_oracle() {
  double worst = 0.0;
  long cases = 0;
  for (int n = 1; n <= 12; ++n) {
    for (int c = 0; c <= n; ++c) {
      for (int k = 1; k <= n; ++k) {
        worst = std::max(worst, std::abs(pass_at_k(n, c, k) - oracle::pass_at_k_subsets(n, c, k)));
        ++cases;
      }
    }
  }
  return {worst <= 1e-12, fmt("%ld (n, c, k) cases with n <= 12: max |estimator - subset enumeration| = %.3g", cases,
                              worst)};
}

Outcome shift_identity() {
  const RunConfig rc = default_run_config();
  const TaskSpec task = rc.make_task();
  const auto params = snapshot(initial_state(rc).params);
  const PolicyEvaluator ft(params);
  const PolicyEvaluator base(snapshot(*params));
  std::vector<Rollout> rollouts;
  for (int i = 0; i < 256; ++i) {
    Rng rng(derive_seed(rc.seed, Stream::kVerify, {2, static_cast<std::uint64_t>(i)}));
    rollouts.push_back(sample_rollout(ft, task, i % task.prompt_arity, 1.0, rng));
  }
  const ShiftReport rep = shift_report(ft, base, rollouts);
  const bool js_zero = std::all_of(rep.js.begin(), rep.js.end(), [](double j) { return j == 0.0; });
  const bool overlap_one =
      std::all_of(rep.topk_overlap_all.begin(), rep.topk_overlap_all.end(), [](double o) { return o == 1.0; });

  Rng rng(11);
  double worst_asym = 0.0;
  double max_js = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t n = 2 + rng.below(15);
    std::vector<double> p(n);
    std::vector<double> q(n);
    double zp = 0.0;
    double zq = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      p[v] = rng.below(5) == 0 ? 0.0 : -std::log(1.0 - rng.uniform());
      q[v] = rng.below(5) == 0 ? 0.0 : -std::log(1.0 - rng.uniform());
      zp += p[v];
      zq += q[v];
    }
    if (zp == 0.0) p[0] = zp = 1.0;
    if (zq == 0.0) q[n - 1] = zq = 1.0;
    for (auto& x : p) x /= zp;
    for (auto& x : q) x /= zq;
    const double a = js_divergence(p, q);
    worst_asym = std::max(worst_asym, std::abs(a - js_divergence(q, p)));
    max_js = std::max(max_js, a);
  }
  const bool ok = js_zero && overlap_one && rep.high_divergence.empty() && worst_asym <= 1e-12 &&
                  max_js <= std::numbers::ln2;
  return {ok, fmt("identical checkpoints: %zu positions, all JS zero: %s, top-k overlap all one: %s, high-divergence "
                  "%zu; 10000 random pairs: max |JS(p,q) - JS(q,p)| = %.3g, max JS = %.6f (ln 2 = %.6f)",
                  rep.js.size(), js_zero ? "yes" : "no", overlap_one ? "yes" : "no", rep.high_divergence.size(),
                  worst_asym, max_js, std::numbers::ln2)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "success-tilt identity", tilt_identity},
      {2, "influence bounds", influence_bounds},
      {3, "lambda=0 reduction", reduction_identity},
      {4, "weight reciprocity", reciprocity},
      {5, "bounded perturbation and gate", bounded_perturbation},
      {6, "gradient checks", gradient_checks},
      {7, "training analog", training_analog},
      {8, "intervention ordering", intervention_ordering},
      {9, "marker fixture", marker_fixture},
      {10, "pass@k oracle", passk_oracle},
      {11, "shift identity", shift_identity},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d %s  %s: %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
