#pragma once

#include <cstdint>
#include <initializer_list>

namespace rlrt {

/// Independent random streams split off one root seed.
enum class Stream : std::uint64_t {
  kTask = 1,
  kInit = 2,
  kPrompt = 3,
  kSampling = 4,
  kIntervention = 5,
  kVerify = 6,
  kMinibatch = 7,
};

/// Finalizer from SplitMix64; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

/// Counter-based derivation: the same (root, stream, counters) always yields
/// the same seed, independent of how many draws other streams consumed.
std::uint64_t derive_seed(std::uint64_t root, Stream stream,
                          std::initializer_list<std::uint64_t> counters = {});

/// SplitMix64 generator. The whole state is one word, so checkpointing an
/// Rng is copying `state()`.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() { return next(); }
  std::uint64_t next();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace rlrt
