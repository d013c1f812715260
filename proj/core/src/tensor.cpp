#include "mncastle/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mncastle/errors.hpp"

namespace mncastle {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeMismatch("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                        shape_to_string(shape_));
  }
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeMismatch("ragged rows in Tensor::from_rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor out(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) out.data_[i * n + i] = 1.0;
  return out;
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) throw ShapeMismatch("index rank does not match tensor rank");
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw ShapeMismatch("index out of range on axis " + std::to_string(axis));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeMismatch("item() on tensor of shape " + shape_to_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeMismatch("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::size_t batch_count(const Shape& shape) {
  if (shape.size() < 2) throw ShapeMismatch("expected a matrix or a batch of matrices");
  return shape_size(Shape(shape.begin(), shape.end() - 2));
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeMismatch("cannot broadcast " + shape_to_string(a) + " with " + shape_to_string(b));
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeMismatch("operator+ on " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeMismatch("operator- on " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

namespace {

struct MatmulPlan {
  std::size_t batch, m, k, n;
  bool broadcast_a, broadcast_b;
  Shape out_shape;
};

MatmulPlan plan_matmul(const Shape& a, const Shape& b) {
  if (a.size() < 2 || b.size() < 2) throw ShapeMismatch("matmul needs operands of rank >= 2");
  MatmulPlan p{};
  p.m = a[a.size() - 2];
  p.k = a[a.size() - 1];
  p.n = b[b.size() - 1];
  if (b[b.size() - 2] != p.k) {
    throw ShapeMismatch("matmul inner extents differ: " + shape_to_string(a) + " x " + shape_to_string(b));
  }
  const Shape batch_a(a.begin(), a.end() - 2);
  const Shape batch_b(b.begin(), b.end() - 2);
  p.broadcast_a = batch_a.empty() && !batch_b.empty();
  p.broadcast_b = batch_b.empty() && !batch_a.empty();
  if (!p.broadcast_a && !p.broadcast_b && batch_a != batch_b) {
    throw ShapeMismatch("matmul batch extents differ: " + shape_to_string(a) + " x " + shape_to_string(b));
  }
  p.out_shape = p.broadcast_a ? batch_b : batch_a;
  p.batch = shape_size(p.out_shape);
  p.out_shape.push_back(p.m);
  p.out_shape.push_back(p.n);
  return p;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const MatmulPlan p = plan_matmul(a.shape(), b.shape());
  Tensor out(p.out_shape);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* pc = out.values().data();
  for (std::size_t bi = 0; bi < p.batch; ++bi) {
    const double* ab = pa + (p.broadcast_a ? 0 : bi * p.m * p.k);
    const double* bb = pb + (p.broadcast_b ? 0 : bi * p.k * p.n);
    double* cb = pc + bi * p.m * p.n;
    for (std::size_t i = 0; i < p.m; ++i) {
      double* crow = cb + i * p.n;
      for (std::size_t q = 0; q < p.k; ++q) {
        const double aiq = ab[i * p.k + q];
        if (aiq == 0.0) continue;
        const double* brow = bb + q * p.n;
        for (std::size_t j = 0; j < p.n; ++j) crow[j] += aiq * brow[j];
      }
    }
  }
  return out;
}

Tensor transpose_last2(const Tensor& a) {
  if (a.rank() < 2) throw ShapeMismatch("transpose needs rank >= 2");
  Shape shape = a.shape();
  const std::size_t r = shape[shape.size() - 2];
  const std::size_t c = shape[shape.size() - 1];
  std::swap(shape[shape.size() - 2], shape[shape.size() - 1]);
  Tensor out(shape);
  const std::size_t batch = shape_size(shape) / std::max<std::size_t>(r * c, 1);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* src = a.values().data() + b * r * c;
    double* dst = out.values().data() + b * r * c;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
  }
  return out;
}

Tensor cholesky(const Tensor& a, double jitter) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw ShapeMismatch("cholesky needs a square matrix");
  if (jitter < 0.0) throw InvalidArgument("cholesky jitter must be nonnegative");
  const std::size_t n = a.dim(0);
  Tensor l(Shape{n, n});
  const double* pa = a.values().data();
  double* pl = l.values().data();
  for (std::size_t j = 0; j < n; ++j) {
    double d = pa[j * n + j] + jitter;
    for (std::size_t q = 0; q < j; ++q) d -= pl[j * n + q] * pl[j * n + q];
    if (!(d > 0.0)) {
      throw NotPositiveDefinite("nonpositive pivot " + std::to_string(d) + " at column " + std::to_string(j));
    }
    const double ljj = std::sqrt(d);
    pl[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = pa[i * n + j];
      for (std::size_t q = 0; q < j; ++q) s -= pl[i * n + q] * pl[j * n + q];
      pl[i * n + j] = s / ljj;
    }
  }
  return l;
}

Tensor cholesky_with_retries(const Tensor& a, double jitter, int retries, double* used_jitter) {
  double current = jitter;
  for (int attempt = 0;; ++attempt) {
    try {
      Tensor l = cholesky(a, current);
      if (used_jitter) *used_jitter = current;
      return l;
    } catch (const NotPositiveDefinite&) {
      if (attempt >= retries) throw;
      current = current > 0.0 ? 2.0 * current : 1e-6;
    }
  }
}

Tensor triangular_solve(const Tensor& lower, const Tensor& rhs, bool transpose) {
  if (lower.rank() < 2 || rhs.rank() < 2) throw ShapeMismatch("triangular_solve needs matrices");
  const std::size_t n = lower.dim(lower.rank() - 1);
  if (lower.dim(lower.rank() - 2) != n) throw ShapeMismatch("triangular_solve needs square L");
  if (rhs.dim(rhs.rank() - 2) != n) {
    throw ShapeMismatch("triangular_solve extents differ: " + shape_to_string(lower.shape()) + " vs " +
                        shape_to_string(rhs.shape()));
  }
  const std::size_t r = rhs.dim(rhs.rank() - 1);
  const bool shared = lower.rank() == 2;
  if (!shared && Shape(lower.shape().begin(), lower.shape().end() - 2) !=
                     Shape(rhs.shape().begin(), rhs.shape().end() - 2)) {
    throw ShapeMismatch("triangular_solve batch extents differ");
  }
  Tensor x = rhs;
  const std::size_t batch = shape_size(rhs.shape()) / std::max<std::size_t>(n * r, 1);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* pl = lower.values().data() + (shared ? 0 : b * n * n);
    double* px = x.values().data() + b * n * r;
    if (!transpose) {
      for (std::size_t i = 0; i < n; ++i) {
        double* xi = px + i * r;
        for (std::size_t q = 0; q < i; ++q) {
          const double liq = pl[i * n + q];
          if (liq == 0.0) continue;
          const double* xq = px + q * r;
          for (std::size_t c = 0; c < r; ++c) xi[c] -= liq * xq[c];
        }
        const double inv = 1.0 / pl[i * n + i];
        for (std::size_t c = 0; c < r; ++c) xi[c] *= inv;
      }
    } else {
      for (std::size_t ii = n; ii-- > 0;) {
        double* xi = px + ii * r;
        for (std::size_t q = ii + 1; q < n; ++q) {
          const double lqi = pl[q * n + ii];
          if (lqi == 0.0) continue;
          const double* xq = px + q * r;
          for (std::size_t c = 0; c < r; ++c) xi[c] -= lqi * xq[c];
        }
        const double inv = 1.0 / pl[ii * n + ii];
        for (std::size_t c = 0; c < r; ++c) xi[c] *= inv;
      }
    }
  }
  return x;
}

Tensor nilpotent_inverse(const Tensor& cv) {
  if (cv.rank() < 2 || cv.dim(cv.rank() - 1) != cv.dim(cv.rank() - 2)) {
    throw ShapeMismatch("nilpotent_inverse needs square matrices");
  }
  const std::size_t n = cv.dim(cv.rank() - 1);
  const std::size_t batch = batch_count(cv.shape());
  Tensor m(cv.shape());
  std::vector<double> power(n * n);
  std::vector<double> next(n * n);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* pc = cv.values().data() + b * n * n;
    double* pm = m.values().data() + b * n * n;
    double scale_c = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) scale_c = std::max(scale_c, std::abs(pc[i]));
    std::fill(power.begin(), power.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) power[i * n + i] = 1.0;
    std::copy(power.begin(), power.end(), pm);
    // Accumulate C^1 .. C^{N-1}; the loop's final product is C^N.
    for (std::size_t k = 1; k <= n; ++k) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t q = 0; q < n; ++q) {
          const double v = power[i * n + q];
          if (v == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) next[i * n + j] += v * pc[q * n + j];
        }
      power.swap(next);
      if (k < n) {
        for (std::size_t i = 0; i < n * n; ++i) pm[i] += power[i];
      }
    }
    double residual = 0.0;
    for (double v : power) residual = std::max(residual, std::abs(v));
    const double tol = 1e-10 * std::max(1.0, std::pow(scale_c, static_cast<double>(n)));
    if (!(residual <= tol)) {
      throw NotNilpotent("causal slice " + std::to_string(b) + " has |C^N| = " + std::to_string(residual));
    }
  }
  return m;
}

Tensor tril(const Tensor& a, bool strict) {
  if (a.rank() < 2) throw ShapeMismatch("tril needs rank >= 2");
  const std::size_t r = a.dim(a.rank() - 2);
  const std::size_t c = a.dim(a.rank() - 1);
  Tensor out = a;
  const std::size_t batch = a.size() / std::max<std::size_t>(r * c, 1);
  for (std::size_t b = 0; b < batch; ++b) {
    double* p = out.values().data() + b * r * c;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = strict ? i : i + 1; j < c; ++j) p[i * c + j] = 0.0;
  }
  return out;
}

double frobenius_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeMismatch("max_abs_diff on different shapes");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace mncastle
