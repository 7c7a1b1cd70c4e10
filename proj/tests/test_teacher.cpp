#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rlrt/error.hpp"
#include "rlrt/teacher.hpp"
#include "rlrt/trainer.hpp"

using namespace rlrt;

namespace {

TaskSpec modsum(int v, int t, int arity, int m = 5) {
  TaskParams p;
  p.vocab_size = v;
  p.horizon = t;
  p.prompt_arity = arity;
  p.modulus = m;
  p.target = 2;
  return make_task(TaskFamily::kModularSum, p, 3);
}

Rollout rollout_of(const TaskSpec& task, int prompt, std::vector<Token> response) {
  Rollout r;
  r.prompt = prompt;
  r.reward = verify(task, prompt, response);
  r.response = std::move(response);
  return r;
}

}  // namespace

TEST(ExactBayes, ConstantTiltIsIdentity) {
  const auto ps = DistOverVocab::from_probs({0.1, 0.2, 0.3, 0.4});
  const std::vector<double> f(4, 0.37);
  const auto pt = exact_bayes_dist(ps, f, 0.37);
  for (std::size_t v = 0; v < 4; ++v) EXPECT_NEAR(pt.probs[v], ps.probs[v], 1e-15);
}

TEST(ExactBayes, HandExample) {
  const auto ps = DistOverVocab::from_probs({0.5, 0.5});
  const std::vector<double> f{0.8, 0.4};
  const auto pt = exact_bayes_dist(ps, f, 0.6);
  EXPECT_NEAR(pt.probs[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(pt.probs[1], 1.0 / 3.0, 1e-15);
}

TEST(ExactBayes, AllMassOnTheOnlyCorrectToken) {
  const auto ps = DistOverVocab::from_probs({0.5, 0.5});
  const auto pt = exact_bayes_dist(ps, std::vector<double>{1.0, 0.0}, 0.5);
  EXPECT_EQ(pt.probs[0], 1.0);
  EXPECT_EQ(pt.probs[1], 0.0);
  EXPECT_NEAR(ps.log_probs[0] - pt.log_probs[0], -std::log(2.0), 1e-15);
}

TEST(ExactBayes, Errors) {
  const auto ps = DistOverVocab::from_probs({0.5, 0.5});
  try {
    exact_bayes_dist(ps, std::vector<double>{0.0, 0.0}, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateTeacher);
  }
  EXPECT_THROW(exact_bayes_dist(ps, std::vector<double>{0.8, 0.4}, 0.5), Error);
  EXPECT_THROW(exact_bayes_dist(ps, std::vector<double>{1.5, 0.4}, 0.95), Error);
  EXPECT_THROW(exact_bayes_dist(ps, std::vector<double>{0.5}, 0.5), Error);
}

TEST(ContextTeacher, ZeroParamsAreUniform) {
  const TaskSpec task = modsum(5, 3, 2);
  const PolicyParams zero(PolicyDims::for_task(task, 3, 4, 6));
  const auto d = context_teacher_dist(zero, History{1, {2}}, PrivilegedContext{{0, 1, 1}});
  for (double p : d.probs) EXPECT_DOUBLE_EQ(p, 0.2);
}

TEST(ContextTeacher, MaskedContextGivesZeroAsymmetry) {
  const TaskSpec task = modsum(5, 4, 3);
  const PolicyEvaluator ev(snapshot(PolicyParams::initialize(PolicyDims::for_task(task, 3, 4, 6), 4, 0.8)));
  Rng rng(5);
  const Rollout r = sample_rollout(ev, task, 1, 1.0, rng);
  const auto prof = asymmetry_profile(ev, r, ContextView{PrivilegedContext{reference_solution(task, 1)}, true});
  for (std::size_t t = 0; t < prof.size(); ++t) {
    EXPECT_EQ(prof.d_hat[t], 0.0);
    EXPECT_EQ(prof.d_bar[t], 0.0);
    EXPECT_FALSE(prof.skipped[t]);
  }
}

TEST(ContextTeacher, TrainedBatchHasPositiveMeanDbar) {
  const TaskSpec task = modsum(5, 4, 4);
  TrainConfig cfg;
  cfg.group_size = 4;
  cfg.prompts_per_batch = 4;
  cfg.total_steps = 5;
  TrainerState state = make_trainer_state(task, PolicyDims::for_task(task, 3, 8, 16), 7, 0.3);
  Batch batch;
  for (int s = 0; s < 5; ++s) {
    const PolicyEvaluator ev(snapshot(state.params));
    batch = collect_batch(ev, task, cfg, s);
    train_step(state, batch, cfg);
  }
  const PolicyEvaluator ev(snapshot(state.params));
  batch = collect_batch(ev, task, cfg, 5);
  double sum = 0.0;
  int n = 0;
  for (const auto& g : batch.groups) {
    for (const auto& rec : g.rollouts) {
      if (!rec.has_teacher) continue;
      for (double d : rec.profile.d_bar) {
        sum += d;
        ++n;
      }
    }
  }
  ASSERT_GT(n, 0);
  EXPECT_GT(sum / n, 0.0);
}

TEST(PickContext, Examples) {
  auto group = [](std::vector<int> rewards) {
    std::vector<Rollout> g;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      Rollout r;
      r.reward = rewards[i];
      r.response = {static_cast<Token>(i)};
      g.push_back(r);
    }
    return g;
  };
  auto g1 = group({0, 1, 0});
  EXPECT_EQ(pick_context(g1, 0)->tokens, (std::vector<Token>{1}));
  auto g2 = group({1, 0, 0});
  EXPECT_EQ(pick_context(g2, 0)->tokens, (std::vector<Token>{0}));
  auto g3 = group({0, 0, 0});
  EXPECT_FALSE(pick_context(g3, 1).has_value());
  auto g4 = group({1, 0, 1});
  EXPECT_EQ(pick_context(g4, 0)->tokens, (std::vector<Token>{2}));
  EXPECT_EQ(pick_context(g4, 2)->tokens, (std::vector<Token>{0}));
}

TEST(Asymmetry, HandExample) {
  const auto ps = DistOverVocab::from_probs({0.5, 0.5});
  const auto pt = exact_bayes_dist(ps, std::vector<double>{0.8, 0.4}, 0.6);
  EXPECT_NEAR(ps.log_probs[1] - pt.log_probs[1], std::log(1.5), 1e-15);
  EXPECT_NEAR(kl_divergence(ps, pt), 0.5 * std::log(0.75) + 0.5 * std::log(1.5), 1e-15);
  EXPECT_NEAR(kl_divergence(ps, pt), 0.05889, 1e-5);
  // f above the mean: exploit (negative); below: explore (positive).
  EXPECT_LT(ps.log_probs[0] - pt.log_probs[0], 0.0);
  EXPECT_GT(ps.log_probs[1] - pt.log_probs[1], 0.0);
}

TEST(Asymmetry, ExactBayesMatchesTiltIdentityAndStoredDistributions) {
  Rng rng(8);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const TaskSpec task = modsum(4, 3, 2, 3);
    const PolicyParams params =
        PolicyParams::initialize(PolicyDims::for_task(task, 3, 4, 6), rng.next(), 0.5 + rng.uniform());
    const PolicyEvaluator ev(snapshot(params));
    Rng srng(rng.next());
    const int prompt = static_cast<int>(srng.below(2));
    const Rollout r = sample_rollout(ev, task, prompt, 1.0, srng);
    const SuccessTable table(task, ev, prompt);
    const auto cached = asymmetry_profile(ev, r, ExactBayesView{&task, &table});
    const auto direct = asymmetry_profile(params, r, ExactBayesView{&task, nullptr});
    History h{prompt, {}};
    for (std::size_t t = 0; t < r.response.size(); ++t) {
      EXPECT_EQ(cached.skipped[t], direct.skipped[t]);
      EXPECT_GE(direct.d_bar[t], -1e-12);
      const auto& s = direct.student[t];
      const auto& te = direct.teacher[t];
      double kl = 0.0;
      for (std::size_t v = 0; v < s.size(); ++v) {
        if (s.probs[v] > 0) kl += s.probs[v] * (s.log_probs[v] - te.log_probs[v]);
      }
      if (std::isfinite(direct.d_bar[t])) {
        EXPECT_NEAR(direct.d_bar[t], kl, 1e-9);
      }
      if (!direct.skipped[t]) {
        const auto f = oracle::per_token_success(task, params, h);
        double f_bar = 0.0;
        for (std::size_t v = 0; v < f.size(); ++v) f_bar += s.probs[v] * f[v];
        const auto y = static_cast<std::size_t>(r.response[t]);
        EXPECT_NEAR(direct.d_hat[t], std::log(f_bar) - std::log(f[y]), 1e-9);
        EXPECT_NEAR(cached.d_hat[t], direct.d_hat[t], 1e-12);
        ++checked;
      } else {
        EXPECT_EQ(direct.d_hat[t], 0.0);
      }
      h.tokens.push_back(r.response[t]);
    }
  }
  EXPECT_GT(checked, 20);
}

TEST(Asymmetry, HopelessPrefixIsSkipped) {
  // Two hits of hidden token 1 needed in two positions: only (1, 1) is correct.
  TaskParams p;
  p.vocab_size = 2;
  p.horizon = 2;
  p.prompt_arity = 1;
  p.hidden_set = std::vector<Token>{1};
  p.required_hits = 2;
  const TaskSpec task = make_task(TaskFamily::kHiddenLexicon, p, 0);
  const PolicyEvaluator ev(snapshot(PolicyParams(PolicyDims::for_task(task, 2, 2, 2))));
  const auto prof = asymmetry_profile(ev, rollout_of(task, 0, {0, 1}), ExactBayesView{&task, nullptr});
  EXPECT_TRUE(prof.skipped[0]);  // f(0) = 0
  EXPECT_TRUE(prof.skipped[1]);  // f_bar = 0
  const auto good = asymmetry_profile(ev, rollout_of(task, 0, {1, 1}), ExactBayesView{&task, nullptr});
  EXPECT_FALSE(good.skipped[0]);
  EXPECT_NEAR(good.d_hat[0], std::log(0.25) - std::log(0.5), 1e-12);
  EXPECT_NEAR(good.d_hat[1], std::log(0.5), 1e-12);
  EXPECT_TRUE(std::isinf(good.d_bar[0]));
}

TEST(Asymmetry, InfluenceIsBoundedByTotalVariation) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> w(6);
    std::vector<double> f(6);
    for (int v = 0; v < 6; ++v) {
      w[static_cast<std::size_t>(v)] = rng.uniform() + 1e-3;
      f[static_cast<std::size_t>(v)] = rng.uniform();
    }
    double z = 0.0;
    for (double x : w) z += x;
    for (double& x : w) x /= z;
    const auto ps = DistOverVocab::from_probs(w);
    double f_bar = 0.0;
    for (std::size_t v = 0; v < 6; ++v) f_bar += ps.probs[v] * f[v];
    const auto pt = exact_bayes_dist(ps, f, f_bar);
    double inf = 0.0;
    for (std::size_t v = 0; v < 6; ++v) inf += ps.probs[v] * std::abs(f[v] - f_bar);
    const double tv = total_variation(ps.probs, pt.probs);
    EXPECT_NEAR(inf, 2.0 * f_bar * tv, 1e-12);
    EXPECT_LE(inf, 2.0 * tv + 1e-12);
    EXPECT_LE(inf * inf, 2.0 * kl_divergence(ps, pt) + 1e-12);
  }
}
