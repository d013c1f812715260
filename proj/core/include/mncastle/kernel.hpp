#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "mncastle/rng.hpp"
#include "mncastle/tensor.hpp"

namespace mncastle::stochastic {

/// Covariance function built from RBF, Periodic, Linear and Matern-3/2
/// primitives combined with + and *. Immutable; copies share the tree.
///
/// Primitive forms (sigma is a variance, r = |t - t'|):
///   rbf(s, l)          s * exp(-r^2 / (2 l^2))
///   periodic(s, l, p)  s * exp(-2 sin^2(pi r / p) / l^2)
///   linear(s)          s * t * t'
///   matern32(s, l)     s * (1 + sqrt(3) r / l) * exp(-sqrt(3) r / l)
class Kernel {
 public:
  enum class Kind { Rbf, Periodic, Linear, Matern32, Sum, Product };

  static Kernel rbf(double variance, double lengthscale);
  static Kernel periodic(double variance, double lengthscale, double period);
  static Kernel linear(double variance);
  static Kernel matern32(double variance, double lengthscale);

  friend Kernel operator+(const Kernel& a, const Kernel& b);
  friend Kernel operator*(const Kernel& a, const Kernel& b);

  Kind kind() const;
  double operator()(double t, double u) const;
  /// Symmetric T x T covariance over `times`.
  Tensor gram(std::span<const double> times) const;
  /// Round-trippable text form, e.g. "periodic(1,2,2)+linear(1)*matern32(1,2)".
  std::string to_string() const;
  /// Marginal variance at a stationary kernel's diagonal (sum/product of
  /// primitive variances; Linear contributes s * t^2 and is reported as s).
  double variance_scale() const;

  struct Node;  // expression-tree node, defined in kernel.cpp

 private:
  explicit Kernel(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// Parses a kernel expression. Arguments are numbers or the token `1/tau`,
/// which is bound to `1 / tau` (throws ParseError when `tau` is missing or
/// zero). Throws InvalidArgument for nonpositive variances, lengthscales or
/// periods.
Kernel parse_kernel(std::string_view text, std::optional<double> tau = std::nullopt);

/// Draws `batch` independent zero-mean GP paths over `times`. Each row is
/// L * eps with L the Cholesky factor of gram + jitter I (jitter doubling up
/// to three times). Output shape: batch x T.
Tensor gp_sample_batched(const Kernel& kernel, std::span<const double> times, std::size_t batch, Rng& rng,
                         double jitter = 1e-6);

}  // namespace mncastle::stochastic
