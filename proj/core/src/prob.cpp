#include "rlrt/prob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "rlrt/error.hpp"

namespace rlrt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// p * log(p / m) with the 0 * log 0 = 0 convention.
double xlogy_ratio(double p, double m) {
  if (p == 0.0) return 0.0;
  if (m == 0.0) return kInf;
  return p * (std::log(p) - std::log(m));
}
}  // namespace

DistOverVocab DistOverVocab::from_logits(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) fail(ErrorCode::kInvalidArgs, "temperature must be positive");
  DistOverVocab d;
  const std::size_t n = logits.size();
  d.probs.resize(n);
  d.log_probs.resize(n);
  double mx = -kInf;
  for (double z : logits) mx = std::max(mx, z / temperature);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d.log_probs[i] = logits[i] / temperature - mx;
    sum += std::exp(d.log_probs[i]);
  }
  const double log_z = std::log(sum);
  for (std::size_t i = 0; i < n; ++i) {
    d.log_probs[i] -= log_z;
    d.probs[i] = std::exp(d.log_probs[i]);
  }
  return d;
}

DistOverVocab DistOverVocab::from_probs(std::vector<double> probs) {
  DistOverVocab d;
  d.log_probs.resize(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    d.log_probs[i] = probs[i] > 0.0 ? std::log(probs[i]) : -kInf;
  }
  d.probs = std::move(probs);
  return d;
}

DistOverVocab DistOverVocab::uniform(std::size_t n) {
  return from_probs(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

double entropy(const DistOverVocab& p) {
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.probs[i] > 0.0) h -= p.probs[i] * p.log_probs[i];
  }
  return h;
}

double kl_divergence(const DistOverVocab& p, const DistOverVocab& q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.probs[i] == 0.0) continue;
    if (q.probs[i] == 0.0) return kInf;
    kl += p.probs[i] * (p.log_probs[i] - q.log_probs[i]);
  }
  return kl;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += xlogy_ratio(p[i], q[i]);
  return kl;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  double l1 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) l1 += std::abs(p[i] - q[i]);
  return 0.5 * l1;
}

double js_divergence(std::span<const double> p, std::span<const double> q, double alpha) {
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = alpha * p[i] + (1.0 - alpha) * q[i];
    a += xlogy_ratio(p[i], m);
    b += xlogy_ratio(q[i], m);
  }
  // Rounding in normalized inputs can push disjoint supports a few ulp past ln 2.
  return std::clamp(alpha * a + (1.0 - alpha) * b, 0.0, std::numbers::ln2);
}

std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return values[a] > values[b] || (values[a] == values[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t argmin(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

}  // namespace rlrt
