#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rlrt/prob.hpp"
#include "rlrt/rng.hpp"

namespace rlrt {

using Token = int;

enum class TaskFamily { kModularSum, kHiddenLexicon };

/// User-facing knobs for make_task. Fields irrelevant to the chosen family are ignored.
struct TaskParams {
  int vocab_size = 8;
  int horizon = 5;
  int prompt_arity = 8;
  std::uint64_t enumeration_budget = 1'000'000;
  // ModularSum
  int modulus = 5;
  int target = 2;
  // HiddenLexicon: either an explicit set or a seeded draw of `hidden_set_size` tokens.
  std::optional<std::vector<Token>> hidden_set;
  int hidden_set_size = 1;
  int required_hits = 1;
};

/// A verifiable fixed-length sequence task. Tokens 0..V-1 are ordinary;
/// id V is the reserved RESET token, which the verifier ignores.
///
/// Prompts are opaque ids in [0, prompt_arity). For ModularSum prompt p adds
/// offset p mod M to the sum; for HiddenLexicon prompt p rotates the hidden set by p.
struct TaskSpec {
  TaskFamily family = TaskFamily::kModularSum;
  int vocab_size = 8;
  int horizon = 5;
  int prompt_arity = 1;
  std::uint64_t enumeration_budget = 1'000'000;
  int modulus = 5;
  int target = 2;
  std::vector<Token> hidden_set;
  int required_hits = 1;
  std::uint64_t seed = 0;

  Token reset_token() const { return vocab_size; }
  int prompt_offset(int prompt) const;
  std::vector<Token> hidden_set_for(int prompt) const;
};

TaskSpec make_task(TaskFamily family, const TaskParams& params, std::uint64_t seed);

/// V^n, saturating at UINT64_MAX.
std::uint64_t saturating_pow(std::uint64_t base, int exponent);

/// Reward in {0, 1}. RESET tokens are skipped; the remaining tokens must
/// number exactly `horizon` and lie in [0, V).
int verify(const TaskSpec& task, int prompt, std::span<const Token> response);

/// Prompt id plus the response generated so far (may contain RESET).
struct History {
  int prompt = 0;
  std::vector<Token> tokens;
};

/// One sampled response with its verifiable reward and the student's
/// per-position log-probabilities (temperature 1) of the sampled tokens.
struct Rollout {
  int prompt = 0;
  std::vector<Token> response;
  int reward = 0;
  std::vector<double> student_logprobs;
  int group_id = 0;
  std::uint64_t seed = 0;
};

/// Count of non-RESET tokens in the history: the 0-based index of the next ordinary token.
int response_position(const TaskSpec& task, const History& history);

/// Anything that yields a next-token distribution over the V ordinary tokens.
class NextTokenModel {
 public:
  virtual ~NextTokenModel() = default;
  virtual DistOverVocab next_token_dist(const History& history) const = 0;
};

struct SuccessProfile {
  std::vector<double> f;  ///< f[v] = Pr[R=1 | history, next token v]
  double f_bar = 0.0;     ///< sum_v P_S(v) f[v]
  DistOverVocab student;  ///< P_S at the history
};

/// Exact per-token success probabilities by enumerating every completion of
/// the history, weighted by the model's probabilities.
SuccessProfile success_profile(const TaskSpec& task, const NextTokenModel& model,
                               const History& history);

/// Success probabilities for every RESET-free prefix of one prompt, built
/// once by backward induction over the full completion tree.
class SuccessTable {
 public:
  SuccessTable(const TaskSpec& task, const NextTokenModel& model, int prompt);

  /// Profile at the prefix `tokens` (ordinary tokens only, length < horizon).
  SuccessProfile profile(std::span<const Token> tokens) const;
  /// Pr[R=1 | prefix] for any prefix length <= horizon.
  double success(std::span<const Token> tokens) const;

 private:
  std::size_t index_of(std::span<const Token> tokens) const;

  int vocab_size_;
  int horizon_;
  std::vector<std::vector<double>> success_;            // [depth][node]
  std::vector<std::vector<DistOverVocab>> dists_;       // [depth][node], depth < horizon
};

int sample_prompt(const TaskSpec& task, Rng& rng);

/// Lexicographically smallest correct response for the prompt.
std::vector<Token> reference_solution(const TaskSpec& task, int prompt);

}  // namespace rlrt
