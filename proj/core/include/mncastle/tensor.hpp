#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mncastle {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles. A rank-0 tensor holds a single scalar.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor vector(std::vector<double> v);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;

  /// Value of a single-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

/// Number of stacked matrices in a tensor of rank >= 2.
std::size_t batch_count(const Shape& shape);

/// NumPy-style broadcast of two shapes; throws ShapeMismatch.
Shape broadcast_shapes(const Shape& a, const Shape& b);

// Elementwise helpers for plain (non-differentiated) arithmetic on equal shapes.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

/// Batched matrix product over the last two axes. A rank-2 operand is
/// broadcast across the batch axes of the other.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose_last2(const Tensor& a);

/// Lower-triangular L with L*L^T = A + jitter*I. Only the lower triangle of A
/// is read. Throws NotPositiveDefinite on a nonpositive pivot.
Tensor cholesky(const Tensor& a, double jitter = 0.0);

/// Cholesky with escalating jitter: starts at `jitter` and doubles it up to
/// `retries` more times before giving up.
Tensor cholesky_with_retries(const Tensor& a, double jitter = 1e-6, int retries = 3,
                             double* used_jitter = nullptr);

/// Solves L X = B (or L^T X = B when `transpose`) for lower-triangular L.
/// L may be rank 2 (shared across B's batch) or carry B's batch axes.
Tensor triangular_solve(const Tensor& lower, const Tensor& rhs, bool transpose = false);

/// (I - C)^{-1} for each nilpotent matrix C of a batch, evaluated as the
/// finite power series sum_{n<N} C^n. Throws NotNilpotent when |C^N| exceeds
/// 1e-10 (scaled by max|C|^N when that is larger than one).
Tensor nilpotent_inverse(const Tensor& c);

/// Keeps the lower triangle of every matrix; `strict` also zeroes the diagonal.
Tensor tril(const Tensor& a, bool strict = false);

double frobenius_norm(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace mncastle
