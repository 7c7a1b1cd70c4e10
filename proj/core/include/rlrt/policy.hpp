#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "rlrt/prob.hpp"
#include "rlrt/rng.hpp"
#include "rlrt/taskenv.hpp"

namespace rlrt {

/// Shape of the fixed-window policy.
///
/// The input is a row of symbol slots, each embedded and concatenated:
///   [prompt] [position] [context: BEGIN c_1..c_T END] [last `window` tokens]
/// The student view fills the context slots with PAD. One tanh hidden layer
/// maps the concatenation to logits over the V ordinary tokens.
struct PolicyDims {
  int vocab_size = 8;
  int horizon = 5;
  int prompt_arity = 1;
  int window = 4;
  int embed_dim = 16;
  int hidden_dim = 32;

  int reset_symbol() const { return vocab_size; }
  int pad_symbol() const { return vocab_size + 1; }
  int context_begin_symbol() const { return vocab_size + 2; }
  int context_end_symbol() const { return vocab_size + 3; }
  int prompt_symbol(int prompt) const { return vocab_size + 4 + prompt; }
  int position_symbol(int position) const { return vocab_size + 4 + prompt_arity + position; }
  int num_symbols() const { return vocab_size + 4 + prompt_arity + horizon; }
  int context_slots() const { return horizon + 2; }
  int num_slots() const { return 2 + context_slots() + window; }
  int input_dim() const { return num_slots() * embed_dim; }

  // Offsets into the flat parameter vector.
  std::size_t embedding_offset() const { return 0; }
  std::size_t w1_offset() const;
  std::size_t b1_offset() const;
  std::size_t w2_offset() const;
  std::size_t b2_offset() const;
  std::size_t num_params() const;

  static PolicyDims for_task(const TaskSpec& task, int window = 4, int embed_dim = 16,
                             int hidden_dim = 32);
  bool operator==(const PolicyDims&) const = default;
};

/// Flat parameter storage: embeddings [symbols x d], W1 [h x slots*d], b1 [h],
/// W2 [V x h], b2 [V]. The version counter increases on every update.
class PolicyParams {
 public:
  explicit PolicyParams(const PolicyDims& dims, std::uint64_t seed = 0);

  /// Embeddings and weights i.i.d. uniform in [-scale, scale]; biases zero.
  static PolicyParams initialize(const PolicyDims& dims, std::uint64_t seed, double scale = 0.05);

  const PolicyDims& dims() const { return dims_; }
  std::span<const double> values() const { return values_; }
  std::uint64_t version() const { return version_; }
  std::uint64_t seed() const { return seed_; }

  /// Applies `fn(span<double>)` to the parameters and bumps the version.
  /// Throws kNonFinite (leaving the version bumped) if any value ends up NaN/Inf.
  template <typename Fn>
  void update(Fn&& fn) {
    fn(std::span<double>(values_));
    ++version_;
    check_finite();
  }

  void set_version(std::uint64_t v) { version_ = v; }
  bool all_finite() const;

 private:
  void check_finite() const;

  PolicyDims dims_;
  std::vector<double> values_;
  std::uint64_t version_ = 0;
  std::uint64_t seed_ = 0;
};

using ParamVector = std::vector<double>;

/// Correct response shown to the teacher view.
struct PrivilegedContext {
  std::vector<Token> tokens;
};

/// Slot symbols for one (history, context) pair.
std::vector<int> encode_input(const PolicyDims& dims, const History& history,
                              const PrivilegedContext* context);

DistOverVocab next_token_dist(const PolicyParams& params, const History& history,
                              const PrivilegedContext* context = nullptr);

struct LogProbGrad {
  double logp = 0.0;
  ParamVector grad;
};

/// log P(token | history[, context]) and its analytic gradient.
LogProbGrad logprob_grad(const PolicyParams& params, const History& history, Token token,
                         const PrivilegedContext* context = nullptr);

/// Adds scale * d(sum_v dlogits[v] * logit_v)/dtheta into `grad`.
/// Returns the distribution at the input (temperature 1).
DistOverVocab backprop_logits(const PolicyParams& params, const History& history,
                              const PrivilegedContext* context, std::span<const double> dlogits,
                              double scale, std::span<double> grad);

std::shared_ptr<const PolicyParams> snapshot(const PolicyParams& params);

/// Fast evaluator over an immutable snapshot. Precomputes each slot's
/// first-layer contribution per symbol; outputs are bitwise identical to
/// next_token_dist on the same parameters.
class PolicyEvaluator : public NextTokenModel {
 public:
  explicit PolicyEvaluator(std::shared_ptr<const PolicyParams> params);

  DistOverVocab next_token_dist(const History& history) const override;
  DistOverVocab dist(const History& history, const PrivilegedContext* context,
                     double temperature = 1.0) const;
  std::vector<double> logits(const History& history, const PrivilegedContext* context) const;

  const PolicyParams& params() const { return *params_; }
  std::shared_ptr<const PolicyParams> params_ptr() const { return params_; }

 private:
  std::shared_ptr<const PolicyParams> params_;
  std::vector<double> slot_table_;  // [slot][symbol][hidden]
};

/// Samples `horizon` tokens autoregressively from the student view.
/// temperature == 0 selects greedy decoding (ties to the lowest id).
/// Logged log-probabilities are always at temperature 1.
Rollout sample_rollout(const PolicyEvaluator& policy, const TaskSpec& task, int prompt,
                       double temperature, Rng& rng);

/// Continues `history` until it holds `horizon` ordinary tokens.
std::vector<Token> sample_completion(const PolicyEvaluator& policy, const TaskSpec& task,
                                     const History& history, double temperature, Rng& rng);

}  // namespace rlrt
