#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rlrt {

/// Normalized next-token distribution with its elementwise log.
/// Zero-probability entries carry log = -inf.
struct DistOverVocab {
  std::vector<double> probs;
  std::vector<double> log_probs;

  std::size_t size() const { return probs.size(); }

  static DistOverVocab from_logits(std::span<const double> logits, double temperature = 1.0);
  static DistOverVocab from_probs(std::vector<double> probs);
  static DistOverVocab uniform(std::size_t n);
};

/// Shannon entropy in nats.
double entropy(const DistOverVocab& p);

/// KL(p || q) in nats. +inf when q has a zero where p does not.
double kl_divergence(const DistOverVocab& p, const DistOverVocab& q);
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Total variation: half the L1 distance.
double total_variation(std::span<const double> p, std::span<const double> q);

/// Generalized Jensen-Shannon divergence with mixture M = alpha*p + (1-alpha)*q:
///   alpha*KL(p||M) + (1-alpha)*KL(q||M).
/// alpha = 0.5 is the symmetric JS, bounded by ln 2.
double js_divergence(std::span<const double> p, std::span<const double> q, double alpha = 0.5);

/// Indices of the k largest entries, ordered by decreasing value; ties go to the lower index.
std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k);

/// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> values);
std::size_t argmin(std::span<const double> values);

}  // namespace rlrt
