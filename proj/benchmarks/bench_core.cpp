#include <benchmark/benchmark.h>

#include <vector>

#include "rlrt/config.hpp"
#include "rlrt/experiment.hpp"
#include "rlrt/trainer.hpp"

using namespace rlrt;

namespace {

struct Fixture {
  RunConfig rc = default_run_config();
  TaskSpec task = rc.make_task();
  TrainerState state = initial_state(rc);
};

void BM_NextTokenDist(benchmark::State& st) {
  Fixture fx;
  const PolicyEvaluator ev(snapshot(fx.state.params));
  const History h{0, {1, 2}};
  for (auto _ : st) benchmark::DoNotOptimize(ev.next_token_dist(h));
}
BENCHMARK(BM_NextTokenDist);

void BM_SuccessTable(benchmark::State& st) {
  Fixture fx;
  const PolicyEvaluator ev(snapshot(fx.state.params));
  for (auto _ : st) {
    SuccessTable table(fx.task, ev, 0);
    benchmark::DoNotOptimize(table.success({}));
  }
}
BENCHMARK(BM_SuccessTable)->Unit(benchmark::kMicrosecond);

void BM_PolicyLossGradient(benchmark::State& st) {
  Fixture fx;
  TrainConfig cfg = fx.rc.train_config();
  cfg.scheme = Scheme::kRlrt;
  const PolicyEvaluator ev(snapshot(fx.state.params));
  Batch b = collect_batch(ev, fx.task, cfg, 0);
  assign_credit(b, cfg);
  std::vector<LossItem> items;
  for (auto& g : b.groups) {
    for (auto& r : g.rollouts) items.push_back(LossItem{&r, r.credit.advantages, false, 1.0});
  }
  for (auto _ : st) {
    benchmark::DoNotOptimize(policy_loss(fx.state.params, items, cfg.eps_low, cfg.eps_high, 0, 0.5));
  }
  st.counters["rollouts"] = static_cast<double>(items.size());
}
BENCHMARK(BM_PolicyLossGradient)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& st) {
  Fixture fx;
  TrainConfig cfg = fx.rc.train_config();
  cfg.scheme = static_cast<Scheme>(st.range(0));
  st.SetLabel(std::string(to_string(cfg.scheme)));
  for (auto _ : st) benchmark::DoNotOptimize(advance(fx.state, fx.task, cfg));
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(Scheme::kGrpo))
    ->Arg(static_cast<int>(Scheme::kRlrt))
    ->Arg(static_cast<int>(Scheme::kSdpo))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
