#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rlrt/diagnostics.hpp"
#include "rlrt/policy.hpp"
#include "rlrt/taskenv.hpp"
#include "rlrt/trainer.hpp"

namespace rlrt {

inline constexpr int kConfigSchemaVersion = 1;

struct PolicyShape {
  int window = 4;
  int embed_dim = 16;
  int hidden_dim = 32;
  double init_scale = 0.05;
};

struct RunOptions {
  int checkpoint_every = 50;     ///< 0 writes only the final checkpoint
  int rollout_log_every = 10;    ///< log one batch of rollouts every N steps; 0 disables
};

struct MarkerOptions {
  double alpha = 0.5;
  long min_count = 30;
  double z_threshold = 3.0;
  MarkerVariance variance = MarkerVariance::kMonroe;
  int prompts = 64;               ///< rollouts are drawn for prompts 0..prompts-1, cycling
  int rollouts_per_prompt = 8;
};

struct InterventionOptions {
  int prompts = 64;
  int rollouts_per_prompt = 8;
  int continuations = 16;
  std::vector<InjectStrategy> strategies = {InjectStrategy::kMaxKl, InjectStrategy::kRandom,
                                            InjectStrategy::kMinKl};
};

struct PassKOptions {
  int samples = 16;
  std::vector<int> k_list = {1, 2, 4, 8, 16};
  double temperature = 1.0;
};

struct DiagnosticsConfig {
  MarkerOptions markers;
  InterventionOptions intervene;
  ShiftOptions shift;
  int shift_rollouts = 256;
  PassKOptions passk;
  int verify_positions = 1000;
};

/// Everything a run needs. One root seed feeds every random stream.
struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 1;
  TaskFamily family = TaskFamily::kModularSum;
  TaskParams task;
  PolicyShape policy;
  TrainConfig train;
  RunOptions run;
  DiagnosticsConfig diagnostics;

  /// Throws Error(kConfig) on any out-of-range value.
  void validate() const;
  TaskSpec make_task() const;
  PolicyDims dims() const;
  /// train with the root seed filled in.
  TrainConfig train_config() const;
};

RunConfig default_run_config();

/// Strict JSON parsing: unknown keys, wrong types and a schema version
/// mismatch raise Error(kConfig). Missing keys keep their defaults.
RunConfig parse_run_config(std::string_view json_text);
/// Error(kIo) if the file cannot be read.
RunConfig load_run_config(const std::filesystem::path& path);
/// Pretty JSON with every key present.
std::string dump_run_config(const RunConfig& config);

/// Applies `key=value`. Keys are dotted paths (train.learning_rate) or one of the
/// aliases lambda, scheme, teacher, steps, seed. Values are parsed as JSON,
/// falling back to a plain string.
void apply_override(RunConfig& config, std::string_view assignment);

std::string_view to_string(TaskFamily f);
TaskFamily task_family_from_string(std::string_view s);

}  // namespace rlrt
