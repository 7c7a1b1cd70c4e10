#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "rlrt/config.hpp"
#include "rlrt/trainer.hpp"

namespace rlrt {

/// Freshly initialized parameters and optimizer for a run.
TrainerState initial_state(const RunConfig& config);

/// Collects the batch for `state.step` from the current parameters and trains on it.
StepMetrics advance(TrainerState& state, const TaskSpec& task, const TrainConfig& config, Batch* batch_out = nullptr);

struct ExperimentOptions {
  std::filesystem::path output_dir;
  /// Stop after this many steps in this invocation; the run can be resumed later.
  std::optional<int> max_steps;
  /// Continue from the newest checkpoint in output_dir, if any.
  bool resume = true;
  std::function<void(const StepMetrics&)> on_step;
};

struct ExperimentResult {
  int start_step = 0;
  int end_step = 0;
  std::vector<StepMetrics> metrics;  ///< steps run in this invocation
  std::shared_ptr<const PolicyParams> final_params;
};

/// Output layout:
///   config.json                   exact config echo
///   metrics.csv                   one row per step
///   rollouts.jsonl                every rollout of every logged step
///   checkpoints/step_N/           policy.bin optimizer.bin state.json config.json
/// On resume, rows and records for steps >= N are dropped before continuing,
/// so an interrupted run reproduces an uninterrupted one.
ExperimentResult run_experiment(const RunConfig& config, const ExperimentOptions& options);

/// Newest complete checkpoint directory under output_dir, if any.
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& output_dir);

/// Loads the policy from a checkpoint directory or a policy.bin file.
PolicyParams load_checkpoint_policy(const std::filesystem::path& path);

}  // namespace rlrt
