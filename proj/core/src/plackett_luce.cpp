#include "mncastle/plackett_luce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mncastle/errors.hpp"

namespace mncastle::stochastic {

CausalOrdering::CausalOrdering(std::vector<std::size_t> order) : order_(std::move(order)) {
  std::vector<bool> seen(order_.size(), false);
  for (std::size_t node : order_) {
    if (node >= order_.size() || seen[node]) throw InvalidArgument("ordering is not a permutation");
    seen[node] = true;
  }
}

CausalOrdering CausalOrdering::identity(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return CausalOrdering(std::move(order));
}

std::vector<std::size_t> CausalOrdering::positions() const {
  std::vector<std::size_t> pos(order_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) pos[order_[i]] = i;
  return pos;
}

bool CausalOrdering::precedes(std::size_t parent, std::size_t child) const {
  const auto pos = positions();
  return pos.at(parent) < pos.at(child);
}

namespace {

CausalOrdering argsort_descending(std::span<const double> keys) {
  std::vector<std::size_t> idx(keys.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return keys[a] > keys[b]; });
  return CausalOrdering(std::move(idx));
}

}  // namespace

CausalOrdering pl_sample(std::span<const double> theta, Rng& rng) {
  std::vector<double> z(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) z[i] = theta[i] - std::log(-std::log(rng.uniform()));
  return argsort_descending(z);
}

double pl_log_prob(std::span<const double> theta, const CausalOrdering& ordering) {
  if (ordering.size() != theta.size()) throw LengthMismatch("ordering length differs from score length");
  const std::size_t n = theta.size();
  double lp = 0.0;
  double suffix = -std::numeric_limits<double>::infinity();
  for (std::size_t i = n; i-- > 0;) {
    const double v = theta[ordering[i]];
    const double m = std::max(suffix, v);
    suffix = m + std::log(std::exp(suffix - m) + std::exp(v - m));
    lp += v - suffix;
  }
  return lp;
}

CausalOrdering pl_mode(std::span<const double> theta) { return argsort_descending(theta); }

std::vector<double> uniform_scores(std::size_t n, Rng& rng) {
  std::vector<double> theta(n);
  for (double& t : theta) t = rng.uniform(0.0, static_cast<double>(n));
  return theta;
}

}  // namespace mncastle::stochastic
