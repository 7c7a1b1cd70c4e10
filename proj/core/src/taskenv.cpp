#include "rlrt/taskenv.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "rlrt/error.hpp"

namespace rlrt {

std::uint64_t saturating_pow(std::uint64_t base, int exponent) {
  std::uint64_t r = 1;
  for (int i = 0; i < exponent; ++i) {
    if (base != 0 && r > std::numeric_limits<std::uint64_t>::max() / base) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    r *= base;
  }
  return r;
}

int TaskSpec::prompt_offset(int prompt) const {
  return family == TaskFamily::kModularSum ? prompt % modulus : 0;
}

std::vector<Token> TaskSpec::hidden_set_for(int prompt) const {
  std::vector<Token> h;
  h.reserve(hidden_set.size());
  for (Token t : hidden_set) h.push_back((t + prompt) % vocab_size);
  std::sort(h.begin(), h.end());
  return h;
}

TaskSpec make_task(TaskFamily family, const TaskParams& params, std::uint64_t seed) {
  const auto invalid = [](const std::string& msg) { fail(ErrorCode::kInvalidParams, msg); };
  if (params.vocab_size < 2) invalid("vocab_size must be >= 2");
  if (params.horizon < 1) invalid("horizon must be >= 1");
  if (params.prompt_arity < 1) invalid("prompt_arity must be >= 1");

  TaskSpec task;
  task.family = family;
  task.vocab_size = params.vocab_size;
  task.horizon = params.horizon;
  task.prompt_arity = params.prompt_arity;
  task.enumeration_budget = params.enumeration_budget;
  task.seed = seed;

  if (family == TaskFamily::kModularSum) {
    if (!(params.modulus >= 1 && params.modulus <= params.vocab_size)) {
      invalid("ModularSum requires 1 <= modulus <= vocab_size");
    }
    if (!(params.target >= 0 && params.target < params.modulus)) {
      invalid("ModularSum requires 0 <= target < modulus");
    }
    task.modulus = params.modulus;
    task.target = params.target;
  } else {
    if (params.required_hits < 1 || params.required_hits > params.horizon) {
      invalid("HiddenLexicon requires 1 <= required_hits <= horizon");
    }
    if (params.hidden_set) {
      std::vector<Token> h = *params.hidden_set;
      if (h.empty()) invalid("HiddenLexicon hidden set must be nonempty");
      std::sort(h.begin(), h.end());
      if (std::adjacent_find(h.begin(), h.end()) != h.end()) invalid("hidden set has duplicates");
      if (h.front() < 0 || h.back() >= params.vocab_size) invalid("hidden set outside vocabulary");
      task.hidden_set = std::move(h);
    } else {
      if (params.hidden_set_size < 1 || params.hidden_set_size > params.vocab_size) {
        invalid("hidden_set_size must be in [1, vocab_size]");
      }
      std::vector<Token> all(static_cast<std::size_t>(params.vocab_size));
      std::iota(all.begin(), all.end(), 0);
      Rng rng(derive_seed(seed, Stream::kTask));
      for (int i = 0; i < params.hidden_set_size; ++i) {
        const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(params.vocab_size - i)));
        std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
      }
      all.resize(static_cast<std::size_t>(params.hidden_set_size));
      std::sort(all.begin(), all.end());
      task.hidden_set = std::move(all);
    }
    task.required_hits = params.required_hits;
  }

  const std::uint64_t completions =
      saturating_pow(static_cast<std::uint64_t>(params.vocab_size), params.horizon);
  if (completions > params.enumeration_budget) {
    fail(ErrorCode::kBudgetExceeded, std::to_string(params.vocab_size) + "^" +
                                         std::to_string(params.horizon) + " completions exceed budget " +
                                         std::to_string(params.enumeration_budget));
  }
  return task;
}

int verify(const TaskSpec& task, int prompt, std::span<const Token> response) {
  const Token reset = task.reset_token();
  int length = 0;
  long sum = 0;
  int hits = 0;
  const std::vector<Token> hidden =
      task.family == TaskFamily::kHiddenLexicon ? task.hidden_set_for(prompt) : std::vector<Token>{};
  for (Token t : response) {
    if (t == reset) continue;
    if (t < 0 || t >= task.vocab_size) {
      fail(ErrorCode::kTokenOutOfRange, "token " + std::to_string(t) + " outside [0, " +
                                            std::to_string(task.vocab_size) + ")");
    }
    ++length;
    sum += t;
    if (!hidden.empty() && std::binary_search(hidden.begin(), hidden.end(), t)) ++hits;
  }
  if (length != task.horizon) {
    fail(ErrorCode::kLengthMismatch, "response has " + std::to_string(length) +
                                         " tokens, horizon is " + std::to_string(task.horizon));
  }
  if (task.family == TaskFamily::kModularSum) {
    return (sum + task.prompt_offset(prompt)) % task.modulus == task.target ? 1 : 0;
  }
  return hits >= task.required_hits ? 1 : 0;
}

int response_position(const TaskSpec& task, const History& history) {
  return static_cast<int>(std::count_if(history.tokens.begin(), history.tokens.end(),
                                        [&](Token t) { return t != task.reset_token(); }));
}

SuccessProfile success_profile(const TaskSpec& task, const NextTokenModel& model,
                               const History& history) {
  const int position = response_position(task, history);
  const int remaining = task.horizon - position;
  if (remaining < 1) fail(ErrorCode::kLengthMismatch, "history is already complete");
  const std::uint64_t count = saturating_pow(static_cast<std::uint64_t>(task.vocab_size), remaining);
  if (count > task.enumeration_budget) {
    fail(ErrorCode::kBudgetExceeded, std::to_string(count) + " completions exceed budget");
  }

  const auto V = static_cast<std::size_t>(task.vocab_size);
  const auto r = static_cast<std::size_t>(remaining);

  // Odometer over every completion s[0..r). dists[j] is the model's
  // distribution after appending s[0..j) to the history.
  std::vector<Token> s(r, 0);
  std::vector<DistOverVocab> dists(r);
  History h = history;
  const std::size_t base_len = history.tokens.size();
  const auto refresh = [&](std::size_t from) {
    for (std::size_t j = from; j < r; ++j) {
      h.tokens.resize(base_len);
      h.tokens.insert(h.tokens.end(), s.begin(), s.begin() + static_cast<std::ptrdiff_t>(j));
      dists[j] = model.next_token_dist(h);
    }
  };
  refresh(0);

  SuccessProfile out;
  out.f.assign(V, 0.0);
  out.student = dists[0];

  std::vector<Token> full(history.tokens);
  full.resize(base_len + r);
  while (true) {
    std::copy(s.begin(), s.end(), full.begin() + static_cast<std::ptrdiff_t>(base_len));
    if (verify(task, history.prompt, full) == 1) {
      double w = 1.0;  // probability of s[1..r) given s[0]
      for (std::size_t j = 1; j < r; ++j) w *= dists[j].probs[static_cast<std::size_t>(s[j])];
      out.f[static_cast<std::size_t>(s[0])] += w;
    }
    std::size_t j = r;
    bool done = false;
    while (true) {
      --j;
      if (++s[j] < static_cast<Token>(V)) break;
      s[j] = 0;
      if (j == 0) {
        done = true;
        break;
      }
    }
    if (done) break;
    refresh(j + 1);
  }

  for (std::size_t v = 0; v < V; ++v) out.f_bar += out.student.probs[v] * out.f[v];
  return out;
}

SuccessTable::SuccessTable(const TaskSpec& task, const NextTokenModel& model, int prompt)
    : vocab_size_(task.vocab_size), horizon_(task.horizon) {
  const std::uint64_t leaves = saturating_pow(static_cast<std::uint64_t>(vocab_size_), horizon_);
  if (leaves > task.enumeration_budget) {
    fail(ErrorCode::kBudgetExceeded, std::to_string(leaves) + " completions exceed budget");
  }
  const auto V = static_cast<std::size_t>(vocab_size_);
  const auto T = static_cast<std::size_t>(horizon_);
  success_.resize(T + 1);
  dists_.resize(T);

  std::vector<Token> tokens(T);
  const auto decode = [&](std::size_t depth, std::size_t index) {
    for (std::size_t i = depth; i > 0; --i) {
      tokens[i - 1] = static_cast<Token>(index % V);
      index /= V;
    }
  };

  std::size_t width = 1;
  History h{prompt, {}};
  for (std::size_t d = 0; d < T; ++d) {
    dists_[d].resize(width);
    for (std::size_t i = 0; i < width; ++i) {
      decode(d, i);
      h.tokens.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(d));
      dists_[d][i] = model.next_token_dist(h);
    }
    width *= V;
  }
  success_[T].resize(width);
  for (std::size_t i = 0; i < width; ++i) {
    decode(T, i);
    success_[T][i] = verify(task, prompt, tokens);
  }
  for (std::size_t d = T; d > 0; --d) {
    width /= V;
    success_[d - 1].assign(width, 0.0);
    for (std::size_t i = 0; i < width; ++i) {
      double acc = 0.0;
      for (std::size_t v = 0; v < V; ++v) acc += dists_[d - 1][i].probs[v] * success_[d][i * V + v];
      success_[d - 1][i] = acc;
    }
  }
}

std::size_t SuccessTable::index_of(std::span<const Token> tokens) const {
  if (tokens.size() > static_cast<std::size_t>(horizon_)) {
    fail(ErrorCode::kLengthMismatch, "prefix longer than horizon");
  }
  std::size_t idx = 0;
  for (Token t : tokens) {
    if (t < 0 || t >= vocab_size_) fail(ErrorCode::kTokenOutOfRange, "prefix token out of range");
    idx = idx * static_cast<std::size_t>(vocab_size_) + static_cast<std::size_t>(t);
  }
  return idx;
}

double SuccessTable::success(std::span<const Token> tokens) const {
  return success_[tokens.size()][index_of(tokens)];
}

SuccessProfile SuccessTable::profile(std::span<const Token> tokens) const {
  const std::size_t d = tokens.size();
  if (d >= static_cast<std::size_t>(horizon_)) fail(ErrorCode::kLengthMismatch, "prefix is complete");
  const std::size_t i = index_of(tokens);
  const auto V = static_cast<std::size_t>(vocab_size_);
  SuccessProfile out;
  out.student = dists_[d][i];
  out.f.assign(success_[d + 1].begin() + static_cast<std::ptrdiff_t>(i * V),
               success_[d + 1].begin() + static_cast<std::ptrdiff_t>((i + 1) * V));
  for (std::size_t v = 0; v < V; ++v) out.f_bar += out.student.probs[v] * out.f[v];
  return out;
}

int sample_prompt(const TaskSpec& task, Rng& rng) {
  return static_cast<int>(rng.below(static_cast<std::uint64_t>(task.prompt_arity)));
}

std::vector<Token> reference_solution(const TaskSpec& task, int prompt) {
  const auto T = static_cast<std::size_t>(task.horizon);
  std::vector<Token> s(T, 0);
  while (true) {
    if (verify(task, prompt, s) == 1) return s;
    std::size_t j = T;
    while (j > 0) {
      --j;
      if (++s[j] < task.vocab_size) break;
      s[j] = 0;
      if (j == 0) fail(ErrorCode::kInvalidParams, "task has no correct response");
    }
  }
}

}  // namespace rlrt
