#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mncastle/rng.hpp"

namespace mncastle::stochastic {

/// A permutation of node indices 0..N-1. Position i holds the node at
/// causal rank i (position 0 is the root-most node).
class CausalOrdering {
 public:
  CausalOrdering() = default;
  /// Throws InvalidArgument unless `order` is a permutation of 0..N-1.
  explicit CausalOrdering(std::vector<std::size_t> order);

  static CausalOrdering identity(std::size_t n);

  std::size_t size() const noexcept { return order_.size(); }
  /// Node at position `pos`.
  std::size_t operator[](std::size_t pos) const { return order_[pos]; }
  const std::vector<std::size_t>& nodes() const noexcept { return order_; }
  /// Inverse permutation: positions()[node] is the node's rank.
  std::vector<std::size_t> positions() const;
  /// True when `parent` is ranked before `child`.
  bool precedes(std::size_t parent, std::size_t child) const;

  friend bool operator==(const CausalOrdering&, const CausalOrdering&) = default;
  friend auto operator<=>(const CausalOrdering&, const CausalOrdering&) = default;

 private:
  std::vector<std::size_t> order_;
};

/// Gumbel-perturbed argsort: z_i = theta_i - log(-log v_i), v_i ~ U(0,1),
/// sorted descending (ties to the lower index).
CausalOrdering pl_sample(std::span<const double> theta, Rng& rng);

/// log prod_i exp(theta_{b_i}) / sum_{u >= i} exp(theta_{b_u}).
double pl_log_prob(std::span<const double> theta, const CausalOrdering& ordering);

/// Indices of theta sorted descending, ties broken by lower index first.
CausalOrdering pl_mode(std::span<const double> theta);

/// theta_i ~ U(0, N), the score prior used when sampling ground-truth graphs
/// and the random-ordering baseline.
std::vector<double> uniform_scores(std::size_t n, Rng& rng);

}  // namespace mncastle::stochastic
