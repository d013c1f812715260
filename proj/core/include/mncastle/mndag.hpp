#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mncastle/kernel.hpp"
#include "mncastle/plackett_luce.hpp"
#include "mncastle/rng.hpp"
#include "mncastle/tensor.hpp"

namespace mncastle::mndag {

using stochastic::CausalOrdering;

/// Default multiplier s of the GP time axis nu_t = s * t / T.
inline constexpr double kDefaultAxisScale = 10.0;

struct GenConfig {
  std::size_t nodes = 3;
  std::size_t samples = 512;
  double mu = 0.5;
  double tau = 0.5;
  double delta = 0.5;
  /// Kernel expression for the temporal component; `1/tau` binds to 1/tau.
  std::string kernel = "rbf(0.1,1/tau)";
  double axis_scale = kDefaultAxisScale;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on out-of-range parameters.
  void validate() const;
};

/// J = 1 + Binomial(floor(log2 T) - 1, mu).
int sample_scales(std::size_t samples, double mu, Rng& rng);

/// nu_t = axis_scale * t / T for t = 0..T-1.
std::vector<double> time_axis(std::size_t samples, double axis_scale);

/// N x N matrix with P[n][pos] = 1 iff node n sits at position pos.
Tensor permutation_matrix(const CausalOrdering& ordering);
/// The permutation matrix tiled to J x T x N x N.
Tensor permutation_tensor(const CausalOrdering& ordering, std::size_t scales, std::size_t samples);

/// W = W0 + Wmu + tau * Wtau with the three components kept apart.
/// base is N x N, scale is J x N x N and temporal is J x T x N x N (empty
/// when tau = 0).
struct WeightTensor {
  std::size_t scales = 0;
  std::size_t samples = 0;
  std::size_t nodes = 0;
  double tau = 0.0;
  Tensor base;
  Tensor scale;
  Tensor temporal;

  double at(std::size_t j, std::size_t t, std::size_t n, std::size_t m) const;
  /// Dense J x T x N x N tensor.
  Tensor full() const;
};

WeightTensor sample_weights(std::size_t scales, std::size_t samples, std::size_t nodes, double mu, double tau,
                            const stochastic::Kernel& kernel, std::span<const double> times, Rng& rng);

/// Per-scale strictly lower triangular Bernoulli(delta) masks, J x N x N.
struct EdgeMask {
  Tensor mask;

  std::size_t scales() const { return mask.dim(0); }
  std::size_t nodes() const { return mask.dim(1); }
  /// The mask tiled to J x T x N x N.
  Tensor full(std::size_t samples) const;
};

EdgeMask sample_mask(std::size_t scales, std::size_t nodes, double delta, Rng& rng);

/// C = P' (Pi o W) P as a J x T x N x N tensor, so that C[j][t][n][m] is the
/// weight of the edge m -> n. Throws InvalidArgument if a mask slice is not
/// strictly lower triangular.
Tensor assemble_causal(const WeightTensor& weights, const EdgeMask& mask, const CausalOrdering& ordering);

/// M = (I - C)^{-1} per slice; throws NotNilpotent.
Tensor mixing(const Tensor& causal);

/// S = M M^T per slice.
Tensor ground_truth_spectrum(const Tensor& mixing);

/// Binary J x N x N adjacency: entry (j, n, m) is 1 when m -> n is an edge.
Tensor adjacency_from_mask(const EdgeMask& mask, const CausalOrdering& ordering);

struct MnDag {
  GenConfig config;
  int scales = 1;
  std::vector<double> scores;
  CausalOrdering ordering;
  WeightTensor weights;
  EdgeMask mask;
  Tensor causal;
  Tensor mixing;

  Tensor adjacency() const { return adjacency_from_mask(mask, ordering); }
};

/// Samples J, the ordering, weights and mask from `rng` and assembles the
/// causal and mixing tensors.
MnDag sample_mndag(const GenConfig& config, Rng& rng);

}  // namespace mncastle::mndag
