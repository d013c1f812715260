#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mncastle/tensor.hpp"

/// Define-by-run reverse-mode automatic differentiation over Tensor values.
///
/// Every op appends a node holding its primal value and a closure that maps
/// the node's adjoint onto its parents' adjoints. Backward walks the nodes in
/// strict reverse insertion order, so identical tapes give bit-identical
/// gradients. A tape belongs to one thread and is discarded after each step.
namespace mncastle::ad {

enum class OpKind {
  Leaf,
  Constant,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Scale,
  AddScalar,
  Matmul,
  Transpose,
  Exp,
  Log,
  Square,
  Sqrt,
  Softplus,
  ClampMin,
  Sum,
  SumLast,
  Mean,
  LogSumExp,
  LogSumExpLast,
  TriangularSolve,
  Cholesky,
  IndexMap,
  Reshape,
  NilpotentInverse,
  RbfGram,
  PlLogProb,
};

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct Gradients {
  /// One adjoint per requested input, shaped like that input.
  std::vector<Tensor> adjoints;
  /// Inputs that do not influence the output; their adjoints are zero.
  std::vector<bool> disconnected;

  bool any_disconnected() const;
};

class Tape {
 public:
  /// Receives the node's adjoint and one pointer per parent adjoint
  /// (nullptr for parents that need no gradient).
  using Backward = std::function<void(const Tensor& adjoint, std::span<Tensor* const> parents)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Tensor value);
  /// Input excluded from differentiation.
  Var constant(Tensor value);

  Var record(OpKind kind, Tensor value, std::vector<std::size_t> parents, Backward backward);

  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }

  /// Reverse sweep from a scalar output. Inputs the output does not depend on
  /// are flagged in `disconnected` and receive zero adjoints.
  Gradients grad(Var output, std::span<const Var> inputs) const;

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> parents;
    Tensor value;
    Backward backward;
    bool needs_grad;
  };

  std::vector<Node> nodes_;
};

/// Sums `g` down to `target` (undoes NumPy-style broadcasting).
Tensor sum_to(const Tensor& g, const Shape& target);

// Broadcasting elementwise arithmetic.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator+(Var a, double s) { return add_scalar(a, s); }
inline Var operator-(Var a, double s) { return add_scalar(a, -s); }

Var matmul(Var a, Var b);
Var transpose(Var a);

Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var sqrt(Var a);
Var softplus(Var a);
/// max(a, floor) elementwise; the gradient is passed only where a > floor.
Var clamp_min(Var a, double floor);

Var sum(Var a);
/// Reduces the last axis.
Var sum_last(Var a);
Var mean(Var a);
/// Max-shifted log-sum-exp over all elements.
Var logsumexp(Var a);
Var logsumexp_last(Var a);

Var triangular_solve(Var lower, Var rhs, bool transpose = false);
/// Differentiable Cholesky of a rank-2 matrix (lower triangle read). The
/// jitter escalates as in mncastle::cholesky_with_retries.
Var cholesky(Var a, double jitter = 0.0, int retries = 0);

/// out[i] = a[source[i]], or 0 where source[i] < 0.
Var index_map(Var a, Shape out_shape, std::vector<std::ptrdiff_t> source);
Var reshape(Var a, Shape shape);

/// (I - C)^{-1} for a batch of nilpotent matrices, evaluated as the finite
/// power series sum_{n<N} C^n. Throws NotNilpotent when C^N does not vanish.
Var nilpotent_inverse(Var c);

/// variance * exp(-(x1_i - x2_j)^2 / (2 lengthscale^2)); variance and
/// lengthscale are scalars.
Var rbf_gram(Var x1, Var x2, Var variance, Var lengthscale);

/// Plackett-Luce log-probability of each ordering (node indices, 0-based)
/// under scores `theta`. Output has one entry per ordering.
Var pl_log_prob(Var theta, std::span<const std::vector<std::size_t>> orderings);

}  // namespace mncastle::ad
