#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlrt/diagnostics.hpp"
#include "rlrt/teacher.hpp"
#include "rlrt/trainer.hpp"

namespace rlrt {

/// Column order of metrics.csv; stable within a config schema version.
inline constexpr std::string_view kMetricsHeader =
    "step,scheme,mean_reward,entropy_nats,mean_abs_dhat,mean_dbar,clip_frac,grad_norm,lambda";

/// One CSV row (no newline). Reals use %.17g, so rows round-trip exactly.
std::string metrics_row(const StepMetrics& m, Scheme scheme);

/// One line of rollouts.jsonl (no newline). Non-finite d_bar is written as null.
std::string rollout_json_line(const RolloutRecord& record, Scheme scheme, int step);

/// Checks one JSONL line against the rollout schema. Returns an error
/// description, or nullopt when the line is valid.
std::optional<std::string> validate_rollout_line(std::string_view line);

/// Per rollout: arrays of token ids, D_bar and D_hat for external rendering.
std::string heatmap_json(std::span<const Rollout> rollouts, std::span<const AsymmetryProfile> profiles);

std::string theory_csv(const TheoryReport& report);
std::string markers_csv(const MarkerStats& stats);
std::string intervention_csv(const InterventionResult& result);
std::string intervention_samples_csv(const InterventionResult& result);
std::string shift_positions_csv(const ShiftReport& report);
std::string shift_summary_json(const ShiftReport& report);

/// %.17g, with inf/nan spelled out.
std::string format_real(double x);

/// Whole-file helpers; throw Error(kIo).
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace rlrt
