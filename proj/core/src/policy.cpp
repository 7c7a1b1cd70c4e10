#include "rlrt/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rlrt/error.hpp"

namespace rlrt {

std::size_t PolicyDims::w1_offset() const {
  return static_cast<std::size_t>(num_symbols()) * static_cast<std::size_t>(embed_dim);
}
std::size_t PolicyDims::b1_offset() const {
  return w1_offset() + static_cast<std::size_t>(hidden_dim) * static_cast<std::size_t>(input_dim());
}
std::size_t PolicyDims::w2_offset() const { return b1_offset() + static_cast<std::size_t>(hidden_dim); }
std::size_t PolicyDims::b2_offset() const {
  return w2_offset() + static_cast<std::size_t>(vocab_size) * static_cast<std::size_t>(hidden_dim);
}
std::size_t PolicyDims::num_params() const { return b2_offset() + static_cast<std::size_t>(vocab_size); }

PolicyDims PolicyDims::for_task(const TaskSpec& task, int window, int embed_dim, int hidden_dim) {
  if (window < 1 || embed_dim < 1 || hidden_dim < 1) {
    fail(ErrorCode::kInvalidParams, "policy window, embed_dim and hidden_dim must be positive");
  }
  return PolicyDims{task.vocab_size, task.horizon, task.prompt_arity, window, embed_dim, hidden_dim};
}

PolicyParams::PolicyParams(const PolicyDims& dims, std::uint64_t seed)
    : dims_(dims), values_(dims.num_params(), 0.0), seed_(seed) {}

PolicyParams PolicyParams::initialize(const PolicyDims& dims, std::uint64_t seed, double scale) {
  PolicyParams p(dims, seed);
  Rng rng(derive_seed(seed, Stream::kInit));
  const auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) p.values_[i] = scale * (2.0 * rng.uniform() - 1.0);
  };
  fill(dims.embedding_offset(), dims.w1_offset());
  fill(dims.w1_offset(), dims.b1_offset());
  fill(dims.w2_offset(), dims.b2_offset());
  return p;
}

bool PolicyParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void PolicyParams::check_finite() const {
  if (!all_finite()) fail(ErrorCode::kNonFinite, "policy parameters became non-finite");
}

std::vector<int> encode_input(const PolicyDims& dims, const History& history,
                              const PrivilegedContext* context) {
  if (history.prompt < 0 || history.prompt >= dims.prompt_arity) {
    fail(ErrorCode::kTokenOutOfRange, "prompt id " + std::to_string(history.prompt) + " out of range");
  }
  int position = 0;
  for (Token t : history.tokens) {
    if (t < 0 || t > dims.reset_symbol()) {
      fail(ErrorCode::kTokenOutOfRange, "history token " + std::to_string(t) + " out of range");
    }
    if (t != dims.reset_symbol()) ++position;
  }
  if (position >= dims.horizon) fail(ErrorCode::kLengthMismatch, "history is already complete");

  std::vector<int> slots;
  slots.reserve(static_cast<std::size_t>(dims.num_slots()));
  slots.push_back(dims.prompt_symbol(history.prompt));
  slots.push_back(dims.position_symbol(position));
  if (context != nullptr) {
    if (static_cast<int>(context->tokens.size()) != dims.horizon) {
      fail(ErrorCode::kLengthMismatch, "privileged context must hold `horizon` tokens");
    }
    slots.push_back(dims.context_begin_symbol());
    for (Token t : context->tokens) {
      if (t < 0 || t >= dims.vocab_size) fail(ErrorCode::kTokenOutOfRange, "context token out of range");
      slots.push_back(t);
    }
    slots.push_back(dims.context_end_symbol());
  } else {
    slots.insert(slots.end(), static_cast<std::size_t>(dims.context_slots()), dims.pad_symbol());
  }
  const auto n = static_cast<int>(history.tokens.size());
  for (int i = 0; i < dims.window; ++i) {
    const int src = n - dims.window + i;
    slots.push_back(src >= 0 ? history.tokens[static_cast<std::size_t>(src)] : dims.pad_symbol());
  }
  return slots;
}

namespace {

// out[h] = sum_j W1[h, slot*d + j] * E[symbol, j]
void slot_contribution(const PolicyDims& dims, std::span<const double> v, int slot, int symbol,
                       double* out) {
  const auto d = static_cast<std::size_t>(dims.embed_dim);
  const auto in = static_cast<std::size_t>(dims.input_dim());
  const double* emb = v.data() + dims.embedding_offset() + static_cast<std::size_t>(symbol) * d;
  const double* w1 = v.data() + dims.w1_offset() + static_cast<std::size_t>(slot) * d;
  for (int h = 0; h < dims.hidden_dim; ++h) {
    const double* row = w1 + static_cast<std::size_t>(h) * in;
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += row[j] * emb[j];
    out[h] = acc;
  }
}

struct Forward {
  std::vector<int> symbols;
  std::vector<double> hidden;
  std::vector<double> logits;
};

// Shared tail of both evaluation paths: accumulate slot contributions then the output layer.
template <typename SlotFn>
void finish_forward(const PolicyDims& dims, std::span<const double> v, SlotFn&& slot_fn,
                    Forward& fwd) {
  const auto H = static_cast<std::size_t>(dims.hidden_dim);
  const auto V = static_cast<std::size_t>(dims.vocab_size);
  fwd.hidden.assign(v.begin() + static_cast<std::ptrdiff_t>(dims.b1_offset()),
                    v.begin() + static_cast<std::ptrdiff_t>(dims.b1_offset() + H));
  for (int s = 0; s < dims.num_slots(); ++s) {
    const double* c = slot_fn(s, fwd.symbols[static_cast<std::size_t>(s)]);
    for (std::size_t h = 0; h < H; ++h) fwd.hidden[h] += c[h];
  }
  for (double& x : fwd.hidden) x = std::tanh(x);
  fwd.logits.resize(V);
  const double* w2 = v.data() + dims.w2_offset();
  const double* b2 = v.data() + dims.b2_offset();
  for (std::size_t o = 0; o < V; ++o) {
    double acc = b2[o];
    const double* row = w2 + o * H;
    for (std::size_t h = 0; h < H; ++h) acc += row[h] * fwd.hidden[h];
    fwd.logits[o] = acc;
  }
}

Forward forward_direct(const PolicyParams& params, const History& history,
                       const PrivilegedContext* context) {
  const PolicyDims& dims = params.dims();
  Forward fwd;
  fwd.symbols = encode_input(dims, history, context);
  std::vector<double> scratch(static_cast<std::size_t>(dims.hidden_dim));
  finish_forward(
      dims, params.values(),
      [&](int slot, int symbol) {
        slot_contribution(dims, params.values(), slot, symbol, scratch.data());
        return scratch.data();
      },
      fwd);
  return fwd;
}

}  // namespace

DistOverVocab next_token_dist(const PolicyParams& params, const History& history,
                              const PrivilegedContext* context) {
  return DistOverVocab::from_logits(forward_direct(params, history, context).logits);
}

DistOverVocab backprop_logits(const PolicyParams& params, const History& history,
                              const PrivilegedContext* context, std::span<const double> dlogits,
                              double scale, std::span<double> grad) {
  const PolicyDims& dims = params.dims();
  const Forward fwd = forward_direct(params, history, context);
  const std::span<const double> v = params.values();
  const auto H = static_cast<std::size_t>(dims.hidden_dim);
  const auto V = static_cast<std::size_t>(dims.vocab_size);
  const auto d = static_cast<std::size_t>(dims.embed_dim);
  const auto in = static_cast<std::size_t>(dims.input_dim());

  std::vector<double> dhidden(H, 0.0);
  for (std::size_t o = 0; o < V; ++o) {
    const double g = scale * dlogits[o];
    if (g == 0.0) continue;
    grad[dims.b2_offset() + o] += g;
    double* gw2 = grad.data() + dims.w2_offset() + o * H;
    const double* w2 = v.data() + dims.w2_offset() + o * H;
    for (std::size_t h = 0; h < H; ++h) {
      gw2[h] += g * fwd.hidden[h];
      dhidden[h] += g * w2[h];
    }
  }
  for (std::size_t h = 0; h < H; ++h) {
    dhidden[h] *= 1.0 - fwd.hidden[h] * fwd.hidden[h];
    grad[dims.b1_offset() + h] += dhidden[h];
  }
  for (std::size_t s = 0; s < static_cast<std::size_t>(dims.num_slots()); ++s) {
    const auto sym = static_cast<std::size_t>(fwd.symbols[s]);
    const double* emb = v.data() + dims.embedding_offset() + sym * d;
    double* gemb = grad.data() + dims.embedding_offset() + sym * d;
    for (std::size_t h = 0; h < H; ++h) {
      const double g = dhidden[h];
      if (g == 0.0) continue;
      const std::size_t row = dims.w1_offset() + h * in + s * d;
      for (std::size_t j = 0; j < d; ++j) {
        grad[row + j] += g * emb[j];
        gemb[j] += g * v[row + j];
      }
    }
  }
  return DistOverVocab::from_logits(fwd.logits);
}

LogProbGrad logprob_grad(const PolicyParams& params, const History& history, Token token,
                         const PrivilegedContext* context) {
  const PolicyDims& dims = params.dims();
  if (token < 0 || token >= dims.vocab_size) {
    fail(ErrorCode::kTokenOutOfRange, "token " + std::to_string(token) + " out of range");
  }
  const DistOverVocab p = next_token_dist(params, history, context);
  std::vector<double> dlogits(static_cast<std::size_t>(dims.vocab_size));
  for (std::size_t o = 0; o < dlogits.size(); ++o) {
    dlogits[o] = (static_cast<Token>(o) == token ? 1.0 : 0.0) - p.probs[o];
  }
  LogProbGrad out;
  out.grad.assign(dims.num_params(), 0.0);
  backprop_logits(params, history, context, dlogits, 1.0, out.grad);
  out.logp = p.log_probs[static_cast<std::size_t>(token)];
  return out;
}

std::shared_ptr<const PolicyParams> snapshot(const PolicyParams& params) {
  return std::make_shared<const PolicyParams>(params);
}

PolicyEvaluator::PolicyEvaluator(std::shared_ptr<const PolicyParams> params)
    : params_(std::move(params)) {
  const PolicyDims& dims = params_->dims();
  const auto H = static_cast<std::size_t>(dims.hidden_dim);
  const auto S = static_cast<std::size_t>(dims.num_symbols());
  slot_table_.resize(static_cast<std::size_t>(dims.num_slots()) * S * H);
  for (int s = 0; s < dims.num_slots(); ++s) {
    for (int sym = 0; sym < dims.num_symbols(); ++sym) {
      double* out = slot_table_.data() + (static_cast<std::size_t>(s) * S + static_cast<std::size_t>(sym)) * H;
      slot_contribution(dims, params_->values(), s, sym, out);
    }
  }
}

std::vector<double> PolicyEvaluator::logits(const History& history,
                                            const PrivilegedContext* context) const {
  const PolicyDims& dims = params_->dims();
  const auto H = static_cast<std::size_t>(dims.hidden_dim);
  const auto S = static_cast<std::size_t>(dims.num_symbols());
  Forward fwd;
  fwd.symbols = encode_input(dims, history, context);
  finish_forward(
      dims, params_->values(),
      [&](int slot, int symbol) {
        return slot_table_.data() + (static_cast<std::size_t>(slot) * S + static_cast<std::size_t>(symbol)) * H;
      },
      fwd);
  return std::move(fwd.logits);
}

DistOverVocab PolicyEvaluator::next_token_dist(const History& history) const {
  return DistOverVocab::from_logits(logits(history, nullptr));
}

DistOverVocab PolicyEvaluator::dist(const History& history, const PrivilegedContext* context,
                                    double temperature) const {
  return DistOverVocab::from_logits(logits(history, context), temperature);
}

namespace {

Token draw(const std::vector<double>& logits, double temperature, Rng& rng) {
  if (temperature == 0.0) {
    return static_cast<Token>(argmax(logits));
  }
  const DistOverVocab p = DistOverVocab::from_logits(logits, temperature);
  const double u = rng.uniform();
  double cdf = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    cdf += p.probs[v];
    if (u < cdf) return static_cast<Token>(v);
  }
  // u landed in the rounding gap above the final cdf: take the last supported token
  for (std::size_t v = p.size(); v > 0; --v) {
    if (p.probs[v - 1] > 0.0) return static_cast<Token>(v - 1);
  }
  return 0;
}

}  // namespace

std::vector<Token> sample_completion(const PolicyEvaluator& policy, const TaskSpec& task,
                                     const History& history, double temperature, Rng& rng) {
  if (temperature < 0.0 || !std::isfinite(temperature)) {
    fail(ErrorCode::kInvalidArgs, "temperature must be >= 0 (0 selects greedy decoding)");
  }
  History h = history;
  int position = response_position(task, h);
  while (position < task.horizon) {
    const std::vector<double> z = policy.logits(h, nullptr);
    h.tokens.push_back(draw(z, temperature, rng));
    ++position;
  }
  return h.tokens;
}

Rollout sample_rollout(const PolicyEvaluator& policy, const TaskSpec& task, int prompt,
                       double temperature, Rng& rng) {
  if (temperature < 0.0 || !std::isfinite(temperature)) {
    fail(ErrorCode::kInvalidArgs, "temperature must be >= 0 (0 selects greedy decoding)");
  }
  Rollout r;
  r.prompt = prompt;
  r.seed = rng.state();
  History h{prompt, {}};
  for (int t = 0; t < task.horizon; ++t) {
    const std::vector<double> z = policy.logits(h, nullptr);
    const Token y = draw(z, temperature, rng);
    r.student_logprobs.push_back(DistOverVocab::from_logits(z).log_probs[static_cast<std::size_t>(y)]);
    h.tokens.push_back(y);
  }
  r.response = std::move(h.tokens);
  r.reward = verify(task, prompt, r.response);
  return r;
}

}  // namespace rlrt
