#include "mncastle/mndag.hpp"

#include <cmath>
#include <random>

#include "mncastle/errors.hpp"
#include "mncastle/wavelet.hpp"

namespace mncastle::mndag {

void GenConfig::validate() const {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument(std::string(name) + " must lie in [0, 1]");
  };
  unit(mu, "mu");
  unit(tau, "tau");
  unit(delta, "delta");
  if (nodes < 2) throw InvalidArgument("at least two nodes are required");
  if (samples < 2) throw InvalidArgument("at least two samples are required");
  if (!(axis_scale > 0.0)) throw InvalidArgument("axis scale must be positive");
}

int sample_scales(std::size_t samples, double mu, Rng& rng) {
  if (samples < 2) throw InvalidArgument("sample_scales needs T >= 2");
  const int trials = wavelet::floor_log2(samples) - 1;
  if (trials <= 0 || mu <= 0.0) return 1;
  if (mu >= 1.0) return 1 + trials;
  int successes = 0;
  for (int i = 0; i < trials; ++i) successes += rng.uniform() < mu ? 1 : 0;
  return 1 + successes;
}

std::vector<double> time_axis(std::size_t samples, double axis_scale) {
  std::vector<double> nu(samples);
  for (std::size_t t = 0; t < samples; ++t) nu[t] = axis_scale * static_cast<double>(t) / static_cast<double>(samples);
  return nu;
}

Tensor permutation_matrix(const CausalOrdering& ordering) {
  const std::size_t n = ordering.size();
  Tensor p(Shape{n, n});
  for (std::size_t pos = 0; pos < n; ++pos) p[ordering[pos] * n + pos] = 1.0;
  return p;
}

Tensor permutation_tensor(const CausalOrdering& ordering, std::size_t scales, std::size_t samples) {
  const Tensor slice = permutation_matrix(ordering);
  const std::size_t nn = slice.size();
  const std::size_t n = ordering.size();
  Tensor out(Shape{scales, samples, n, n});
  for (std::size_t b = 0; b < scales * samples; ++b)
    std::copy(slice.values().begin(), slice.values().end(), out.values().begin() + static_cast<long>(b * nn));
  return out;
}

double WeightTensor::at(std::size_t j, std::size_t t, std::size_t n, std::size_t m) const {
  const std::size_t nn = nodes * nodes;
  double w = base[n * nodes + m] + scale[j * nn + n * nodes + m];
  if (tau != 0.0) w += tau * temporal[(j * samples + t) * nn + n * nodes + m];
  return w;
}

Tensor WeightTensor::full() const {
  Tensor out(Shape{scales, samples, nodes, nodes});
  std::size_t i = 0;
  for (std::size_t j = 0; j < scales; ++j)
    for (std::size_t t = 0; t < samples; ++t)
      for (std::size_t n = 0; n < nodes; ++n)
        for (std::size_t m = 0; m < nodes; ++m) out[i++] = at(j, t, n, m);
  return out;
}

WeightTensor sample_weights(std::size_t scales, std::size_t samples, std::size_t nodes, double mu, double tau,
                            const stochastic::Kernel& kernel, std::span<const double> times, Rng& rng) {
  if (times.size() != samples) throw LengthMismatch("time axis length differs from T");
  WeightTensor w;
  w.scales = scales;
  w.samples = samples;
  w.nodes = nodes;
  w.tau = tau;
  w.base = Tensor(Shape{nodes, nodes});
  w.scale = Tensor(Shape{scales, nodes, nodes});

  Rng base_rng = rng.split("w0");
  for (double& v : w.base.values()) v = base_rng.normal();
  if (mu > 0.0) {
    Rng scale_rng = rng.split("wmu");
    const double sd = std::sqrt(mu);
    for (double& v : w.scale.values()) v = sd * scale_rng.normal();
  }
  if (tau > 0.0) {
    Rng gp_rng = rng.split("wtau");
    const std::size_t tubes = scales * nodes * nodes;
    const Tensor paths = stochastic::gp_sample_batched(kernel, times, tubes, gp_rng);
    // paths is (j, n, m) x T; store as J x T x N x N.
    w.temporal = Tensor(Shape{scales, samples, nodes, nodes});
    const std::size_t nn = nodes * nodes;
    for (std::size_t j = 0; j < scales; ++j)
      for (std::size_t e = 0; e < nn; ++e)
        for (std::size_t t = 0; t < samples; ++t)
          w.temporal[(j * samples + t) * nn + e] = paths[(j * nn + e) * samples + t];
  }
  return w;
}

Tensor EdgeMask::full(std::size_t samples) const {
  const std::size_t j_count = scales();
  const std::size_t n = nodes();
  Tensor out(Shape{j_count, samples, n, n});
  for (std::size_t j = 0; j < j_count; ++j)
    for (std::size_t t = 0; t < samples; ++t)
      std::copy_n(mask.values().begin() + static_cast<long>(j * n * n), n * n,
                  out.values().begin() + static_cast<long>((j * samples + t) * n * n));
  return out;
}

EdgeMask sample_mask(std::size_t scales, std::size_t nodes, double delta, Rng& rng) {
  EdgeMask m{Tensor(Shape{scales, nodes, nodes})};
  for (std::size_t j = 0; j < scales; ++j)
    for (std::size_t a = 1; a < nodes; ++a)
      for (std::size_t b = 0; b < a; ++b) m.mask[(j * nodes + a) * nodes + b] = rng.uniform() < delta ? 1.0 : 0.0;
  return m;
}

Tensor assemble_causal(const WeightTensor& weights, const EdgeMask& mask, const CausalOrdering& ordering) {
  const std::size_t n = weights.nodes;
  if (mask.scales() != weights.scales || mask.nodes() != n || ordering.size() != n) {
    throw ShapeMismatch("weights, mask and ordering disagree on dimensions");
  }
  for (std::size_t j = 0; j < mask.scales(); ++j)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b)
        if (mask.mask[(j * n + a) * n + b] != 0.0) throw InvalidArgument("mask slice is not strictly lower triangular");

  // C[n][m] = Chat[pos(n)][pos(m)], i.e. C = P Chat P^T with P[n][pos] = 1.
  const auto pos = ordering.positions();
  Tensor c(Shape{weights.scales, weights.samples, n, n});
  for (std::size_t j = 0; j < weights.scales; ++j)
    for (std::size_t t = 0; t < weights.samples; ++t) {
      double* slice = c.values().data() + (j * weights.samples + t) * n * n;
      for (std::size_t row = 0; row < n; ++row)
        for (std::size_t col = 0; col < n; ++col) {
          const std::size_t a = pos[row];
          const std::size_t b = pos[col];
          if (mask.mask[(j * n + a) * n + b] == 0.0) continue;
          slice[row * n + col] = weights.at(j, t, a, b);
        }
    }
  return c;
}

Tensor mixing(const Tensor& causal) { return nilpotent_inverse(causal); }

Tensor ground_truth_spectrum(const Tensor& mixing) { return matmul(mixing, transpose_last2(mixing)); }

Tensor adjacency_from_mask(const EdgeMask& mask, const CausalOrdering& ordering) {
  const std::size_t n = mask.nodes();
  const auto pos = ordering.positions();
  Tensor adj(Shape{mask.scales(), n, n});
  for (std::size_t j = 0; j < mask.scales(); ++j)
    for (std::size_t row = 0; row < n; ++row)
      for (std::size_t col = 0; col < n; ++col)
        adj[(j * n + row) * n + col] = mask.mask[(j * n + pos[row]) * n + pos[col]];
  return adj;
}

MnDag sample_mndag(const GenConfig& config, Rng& rng) {
  config.validate();
  MnDag g;
  g.config = config;
  Rng scale_rng = rng.split("scales");
  g.scales = sample_scales(config.samples, config.mu, scale_rng);
  Rng order_rng = rng.split("ordering");
  g.scores = stochastic::uniform_scores(config.nodes, order_rng);
  g.ordering = stochastic::pl_sample(g.scores, order_rng);

  const auto times = time_axis(config.samples, config.axis_scale);
  const auto j_count = static_cast<std::size_t>(g.scales);
  if (config.tau > 0.0) {
    const auto kernel = stochastic::parse_kernel(config.kernel, config.tau);
    Rng w_rng = rng.split("weights");
    g.weights = sample_weights(j_count, config.samples, config.nodes, config.mu, config.tau, kernel, times, w_rng);
  } else {
    Rng w_rng = rng.split("weights");
    g.weights = sample_weights(j_count, config.samples, config.nodes, config.mu, 0.0,
                               stochastic::Kernel::rbf(1.0, 1.0), times, w_rng);
  }
  Rng mask_rng = rng.split("mask");
  g.mask = sample_mask(j_count, config.nodes, config.delta, mask_rng);
  g.causal = assemble_causal(g.weights, g.mask, g.ordering);
  g.mixing = mixing(g.causal);
  return g;
}

}  // namespace mncastle::mndag
