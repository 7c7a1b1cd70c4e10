#pragma once

#include <filesystem>

#include "rlrt/policy.hpp"
#include "rlrt/trainer.hpp"

namespace rlrt {

/// Policy binary, little-endian:
///   char[8]  magic "RLRTPOL1"
///   u32      format version (1)
///   u32 x 6  vocab_size, horizon, prompt_arity, window, embed_dim, hidden_dim
///   u64      init seed
///   u64      parameter version
///   u64      parameter count N
///   f64 x N  parameters in PolicyDims offset order
void save_policy(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_policy(const std::filesystem::path& path);

/// Optimizer binary: magic "RLRTADM1", u64 steps, u64 N, f64 m[N], f64 v[N].
void save_optimizer(const std::filesystem::path& path, const AdamState& adam);
AdamState load_optimizer(const std::filesystem::path& path);

}  // namespace rlrt
