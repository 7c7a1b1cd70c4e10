#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rlrt/diagnostics.hpp"

namespace rlrt::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitIo = 4,
};

/// Options shared by every subcommand.
struct CommonArgs {
  std::optional<std::filesystem::path> config;  ///< defaults are used when unset
  std::optional<std::filesystem::path> output;  ///< relative paths resolve against $RLRT_OUTPUT_ROOT
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

struct TrainArgs {
  CommonArgs common;
  std::optional<int> max_steps;
  bool resume = true;
};

struct VerifyArgs {
  CommonArgs common;
  std::optional<long> positions;
};

struct DiagnoseArgs {
  CommonArgs common;
  std::string subcommand;  ///< markers | intervene | shift | passk
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> base_checkpoint;
  std::optional<long> n;
  std::optional<long> c;
  std::optional<long> k;
};

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err, const ProfileFault& fault = {});
int cmd_diagnose(const DiagnoseArgs& args, std::ostream& out, std::ostream& err);

/// Resolves the output directory for a subcommand.
std::filesystem::path resolve_output(const std::optional<std::filesystem::path>& output, const std::string& fallback);

/// Negative control for cmd_verify: f'(v) = f((v+1) mod V) with f_bar recomputed.
ProfileFault off_by_one_fault();

}  // namespace rlrt::cli
