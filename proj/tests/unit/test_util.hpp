#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "mncastle/autodiff.hpp"
#include "mncastle/rng.hpp"
#include "mncastle/tensor.hpp"

namespace mncastle::testing {

using Builder = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

inline double eval_scalar(const Builder& f, const std::vector<Tensor>& inputs) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
  return f(tape, leaves).value().item();
}

/// Largest |analytic - central difference| / max(1, |analytic|, |numeric|)
/// over every input element.
inline double max_gradient_error(const Builder& f, const std::vector<Tensor>& inputs, double h = 1e-5) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
  const ad::Var out = f(tape, leaves);
  const auto grads = tape.grad(out, leaves);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (std::size_t e = 0; e < inputs[i].size(); ++e) {
      auto plus = inputs;
      auto minus = inputs;
      plus[i][e] += h;
      minus[i][e] -= h;
      const double numeric = (eval_scalar(f, plus) - eval_scalar(f, minus)) / (2.0 * h);
      const double analytic = grads.adjoints[i][e];
      const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  return worst;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// Random SPD matrix B B^T + n I.
inline Tensor random_spd(std::size_t n, Rng& rng) {
  const Tensor b = random_tensor({n, n}, rng);
  Tensor a = matmul(b, transpose_last2(b));
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] += static_cast<double>(n);
  return a;
}

/// Random strictly lower-triangular matrix.
inline Tensor random_strict_lower(std::size_t n, Rng& rng, double scale = 1.0) {
  Tensor c({n, n});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < r; ++k) c[r * n + k] = rng.normal(0.0, scale);
  return c;
}

/// Dense Gaussian-elimination solve of A X = B with partial pivoting.
inline Tensor gauss_solve(Tensor a, Tensor b) {
  const std::size_t n = a.dim(0);
  const std::size_t m = b.dim(1);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
    for (std::size_t c = 0; c < m; ++c) std::swap(b[col * m + c], b[piv * m + c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * n + col] / a[col * n + col];
      for (std::size_t c = 0; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      for (std::size_t c = 0; c < m; ++c) b[r * m + c] -= f * b[col * m + c];
    }
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) b[r * m + c] /= a[r * n + r];
  return b;
}

/// The N x N slice (j, t) of a J x T x N x N tensor.
inline Tensor slice(const Tensor& s, std::size_t j, std::size_t t) {
  const std::size_t n = s.dim(2);
  Tensor out(Shape{n, n});
  for (std::size_t e = 0; e < n * n; ++e) out[e] = s[(j * s.dim(1) + t) * n * n + e];
  return out;
}

}  // namespace mncastle::testing
