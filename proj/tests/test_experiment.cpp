#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "rlrt/checkpoint.hpp"
#include "rlrt/error.hpp"
#include "rlrt/experiment.hpp"
#include "rlrt/records.hpp"

using namespace rlrt;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rlrt_exp_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig small_run() {
  RunConfig c = default_run_config();
  c.task.vocab_size = 4;
  c.task.horizon = 3;
  c.task.prompt_arity = 2;
  c.task.modulus = 3;
  c.task.target = 1;
  c.policy = PolicyShape{3, 4, 8, 0.3};
  c.train.group_size = 4;
  c.train.prompts_per_batch = 4;
  c.train.total_steps = 12;
  c.run.checkpoint_every = 4;
  c.run.rollout_log_every = 3;
  return c;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::istringstream in(read_text_file(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Experiment, WritesEveryArtifact) {
  const fs::path dir = fresh_dir("artifacts");
  const RunConfig cfg = small_run();
  const ExperimentResult r = run_experiment(cfg, {dir, std::nullopt, true, nullptr});
  EXPECT_EQ(r.start_step, 0);
  EXPECT_EQ(r.end_step, 12);
  EXPECT_EQ(r.metrics.size(), 12u);
  EXPECT_EQ(read_text_file(dir / "config.json"), dump_run_config(cfg));

  const auto metrics = lines_of(dir / "metrics.csv");
  ASSERT_EQ(metrics.size(), 13u);
  EXPECT_EQ(metrics[0], kMetricsHeader);

  const auto rollouts = lines_of(dir / "rollouts.jsonl");
  EXPECT_EQ(rollouts.size(), 4u * 16u);  // steps 0, 3, 6, 9
  for (const auto& line : rollouts) EXPECT_EQ(validate_rollout_line(line), std::nullopt);

  for (int step : {4, 8, 12}) {
    const fs::path ck = dir / "checkpoints" / ("step_" + std::to_string(step));
    EXPECT_TRUE(fs::exists(ck / "policy.bin")) << ck;
    EXPECT_TRUE(fs::exists(ck / "optimizer.bin"));
    EXPECT_EQ(read_text_file(ck / "config.json"), dump_run_config(cfg));
  }
  EXPECT_EQ(latest_checkpoint(dir), dir / "checkpoints" / "step_12");
  const PolicyParams final_params = load_checkpoint_policy(*latest_checkpoint(dir));
  EXPECT_TRUE(std::equal(final_params.values().begin(), final_params.values().end(),
                         r.final_params->values().begin()));
}

TEST(Experiment, InterruptedRunResumesBitwise) {
  const RunConfig cfg = small_run();
  const fs::path whole = fresh_dir("whole");
  const fs::path parts = fresh_dir("parts");
  run_experiment(cfg, {whole, std::nullopt, true, nullptr});

  const ExperimentResult first = run_experiment(cfg, {parts, 6, true, nullptr});
  EXPECT_EQ(first.end_step, 6);
  // Checkpoints exist at 4 and at the stop (6); the resume starts from 6.
  EXPECT_EQ(latest_checkpoint(parts), parts / "checkpoints" / "step_6");
  const ExperimentResult second = run_experiment(cfg, {parts, std::nullopt, true, nullptr});
  EXPECT_EQ(second.start_step, 6);
  EXPECT_EQ(second.end_step, 12);

  EXPECT_EQ(read_text_file(parts / "metrics.csv"), read_text_file(whole / "metrics.csv"));
  EXPECT_EQ(read_text_file(parts / "rollouts.jsonl"), read_text_file(whole / "rollouts.jsonl"));
  EXPECT_EQ(read_text_file(parts / "checkpoints/step_12/policy.bin"),
            read_text_file(whole / "checkpoints/step_12/policy.bin"));
  EXPECT_EQ(read_text_file(parts / "checkpoints/step_12/optimizer.bin"),
            read_text_file(whole / "checkpoints/step_12/optimizer.bin"));
}

TEST(Experiment, ResumeDropsRowsPastTheCheckpoint) {
  const RunConfig cfg = small_run();
  const fs::path dir = fresh_dir("truncate");
  run_experiment(cfg, {dir, std::nullopt, true, nullptr});
  const std::string full = read_text_file(dir / "metrics.csv");
  // Simulate a crash after step 9 by deleting the later checkpoints.
  fs::remove_all(dir / "checkpoints" / "step_12");
  const ExperimentResult r = run_experiment(cfg, {dir, std::nullopt, true, nullptr});
  EXPECT_EQ(r.start_step, 8);
  EXPECT_EQ(read_text_file(dir / "metrics.csv"), full);
}

TEST(Experiment, IdenticalRunsGiveIdenticalCheckpoints) {
  const RunConfig cfg = small_run();
  const fs::path a = fresh_dir("same_a");
  const fs::path b = fresh_dir("same_b");
  run_experiment(cfg, {a, std::nullopt, true, nullptr});
  run_experiment(cfg, {b, std::nullopt, false, nullptr});
  EXPECT_EQ(read_text_file(a / "checkpoints/step_12/policy.bin"), read_text_file(b / "checkpoints/step_12/policy.bin"));
  EXPECT_EQ(read_text_file(a / "metrics.csv"), read_text_file(b / "metrics.csv"));
}

TEST(Experiment, NoResumeStartsOver) {
  const RunConfig cfg = small_run();
  const fs::path dir = fresh_dir("restart");
  run_experiment(cfg, {dir, 5, true, nullptr});
  const ExperimentResult r = run_experiment(cfg, {dir, std::nullopt, false, nullptr});
  EXPECT_EQ(r.start_step, 0);
  EXPECT_EQ(lines_of(dir / "metrics.csv").size(), 13u);
}

TEST(Experiment, ResumeWithDifferentConfigIsRejected) {
  RunConfig cfg = small_run();
  const fs::path dir = fresh_dir("mismatch");
  run_experiment(cfg, {dir, 4, true, nullptr});
  cfg.train.learning_rate = 0.5;
  try {
    run_experiment(cfg, {dir, std::nullopt, true, nullptr});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(Experiment, UnwritableOutputIsAnIoError) {
  const fs::path file = fresh_dir("blocker");
  write_text_file(file, "x");
  try {
    run_experiment(small_run(), {file / "out", std::nullopt, true, nullptr});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find(file.string()), std::string::npos) << e.what();
  }
}
