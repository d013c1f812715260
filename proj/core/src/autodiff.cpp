#include "mncastle/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "mncastle/errors.hpp"

namespace mncastle::ad {

const Tensor& Var::value() const {
  if (!tape_) throw InvalidArgument("use of an unbound Var");
  return tape_->value(id_);
}

bool Gradients::any_disconnected() const {
  return std::any_of(disconnected.begin(), disconnected.end(), [](bool d) { return d; });
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{OpKind::Leaf, {}, std::move(value), nullptr, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{OpKind::Constant, {}, std::move(value), nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, Tensor value, std::vector<std::size_t> parents, Backward backward) {
  bool needs = false;
  for (std::size_t p : parents) {
    if (p >= nodes_.size()) throw InvalidArgument("parent id beyond tape end");
    needs = needs || nodes_[p].needs_grad;
  }
  if (!needs) backward = nullptr;
  nodes_.push_back(Node{kind, std::move(parents), std::move(value), std::move(backward), needs});
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::grad(Var output, std::span<const Var> inputs) const {
  if (output.tape() != this) throw InvalidArgument("output belongs to another tape");
  if (value(output.id()).size() != 1) throw ShapeMismatch("grad needs a scalar output");

  std::vector<std::optional<Tensor>> adj(nodes_.size());
  adj[output.id()] = Tensor(value(output.id()).shape(), 1.0);
  std::vector<Tensor*> slots;
  for (std::size_t id = output.id() + 1; id-- > 0;) {
    if (!adj[id]) continue;
    const Node& node = nodes_[id];
    if (!node.needs_grad || !node.backward) continue;
    slots.assign(node.parents.size(), nullptr);
    for (std::size_t k = 0; k < node.parents.size(); ++k) {
      const std::size_t p = node.parents[k];
      if (!nodes_[p].needs_grad) continue;
      if (!adj[p]) adj[p] = Tensor(nodes_[p].value.shape(), 0.0);
      slots[k] = &*adj[p];
    }
    node.backward(*adj[id], slots);
  }

  Gradients out;
  out.adjoints.reserve(inputs.size());
  out.disconnected.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.tape() != this) throw InvalidArgument("input belongs to another tape");
    if (adj[in.id()]) {
      out.adjoints.push_back(*adj[in.id()]);
      out.disconnected.push_back(false);
    } else {
      out.adjoints.emplace_back(value(in.id()).shape(), 0.0);
      out.disconnected.push_back(true);
    }
  }
  return out;
}

namespace {

Tape& tape_of(Var a) {
  if (!a.tape()) throw InvalidArgument("use of an unbound Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape() || !a.tape()) throw InvalidArgument("operands live on different tapes");
  return *a.tape();
}

std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    const std::size_t axis = i + out.size() - in.size();
    strides[axis] = in[i] == 1 ? 0 : stride;
    stride *= in[i];
  }
  return strides;
}

// Calls f(out_index, a_index, b_index) for every element of `out`.
template <class F>
void for_each_broadcast(const Shape& out, const Shape& sa, const Shape& sb, F&& f) {
  const std::size_t total = shape_size(out);
  if (sa == out && sb == out) {
    for (std::size_t i = 0; i < total; ++i) f(i, i, i);
    return;
  }
  const auto st_a = broadcast_strides(sa, out);
  const auto st_b = broadcast_strides(sb, out);
  std::vector<std::size_t> counter(out.size(), 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t i = 0; i < total; ++i) {
    f(i, ia, ib);
    for (std::size_t ax = out.size(); ax-- > 0;) {
      ++counter[ax];
      ia += st_a[ax];
      ib += st_b[ax];
      if (counter[ax] < out[ax]) break;
      ia -= st_a[ax] * out[ax];
      ib -= st_b[ax] * out[ax];
      counter[ax] = 0;
    }
  }
}

void accumulate(Tensor* dst, const Tensor& g) {
  if (!dst) return;
  if (dst->shape() == g.shape()) {
    auto d = dst->values();
    auto s = g.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  } else {
    Tensor r = sum_to(g, dst->shape());
    auto d = dst->values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += r[i];
  }
}

template <class F>
Tensor binary_forward(const Tensor& a, const Tensor& b, F&& f) {
  Shape out_shape = broadcast_shapes(a.shape(), b.shape());
  Tensor out(out_shape);
  auto pa = a.values();
  auto pb = b.values();
  auto po = out.values();
  for_each_broadcast(out_shape, a.shape(), b.shape(),
                     [&](std::size_t i, std::size_t ia, std::size_t ib) { po[i] = f(pa[ia], pb[ib]); });
  return out;
}

template <class F, class D>
Var unary(OpKind kind, Var a, F&& f, D&& deriv) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  Tape* tp = &tape;
  const std::size_t ia = a.id();
  const std::size_t iy = tape.size();
  return tape.record(kind, std::move(y), {ia},
                     [tp, ia, iy, deriv](const Tensor& g, std::span<Tensor* const> p) {
                       if (!p[0]) return;
                       const Tensor& xv = tp->value(ia);
                       const Tensor& yv = tp->value(iy);
                       auto dst = p[0]->values();
                       for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * deriv(xv[i], yv[i]);
                     });
}

double softplus_value(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor sum_to(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  if (target.size() > g.rank()) throw ShapeMismatch("sum_to target has higher rank");
  Tensor out(target);
  auto po = out.values();
  auto pg = g.values();
  for_each_broadcast(g.shape(), g.shape(), target,
                     [&](std::size_t i, std::size_t, std::size_t it) { po[it] += pg[i]; });
  return out;
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  Tensor y = binary_forward(a.value(), b.value(), [](double x, double z) { return x + z; });
  return tape.record(OpKind::Add, std::move(y), {a.id(), b.id()},
                     [](const Tensor& g, std::span<Tensor* const> p) {
                       accumulate(p[0], g);
                       accumulate(p[1], g);
                     });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  Tensor y = binary_forward(a.value(), b.value(), [](double x, double z) { return x - z; });
  return tape.record(OpKind::Sub, std::move(y), {a.id(), b.id()},
                     [](const Tensor& g, std::span<Tensor* const> p) {
                       accumulate(p[0], g);
                       if (p[1]) accumulate(p[1], -1.0 * g);
                     });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  Tensor y = binary_forward(a.value(), b.value(), [](double x, double z) { return x * z; });
  Tape* tp = &tape;
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(OpKind::Mul, std::move(y), {ia, ib},
                     [tp, ia, ib](const Tensor& g, std::span<Tensor* const> p) {
                       const Tensor& av = tp->value(ia);
                       const Tensor& bv = tp->value(ib);
                       if (p[0]) {
                         Tensor ga(g.shape());
                         for_each_broadcast(g.shape(), av.shape(), bv.shape(),
                                            [&](std::size_t i, std::size_t, std::size_t j) { ga[i] = g[i] * bv[j]; });
                         accumulate(p[0], ga);
                       }
                       if (p[1]) {
                         Tensor gb(g.shape());
                         for_each_broadcast(g.shape(), av.shape(), bv.shape(),
                                            [&](std::size_t i, std::size_t j, std::size_t) { gb[i] = g[i] * av[j]; });
                         accumulate(p[1], gb);
                       }
                     });
}

Var div(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  Tensor y = binary_forward(a.value(), b.value(), [](double x, double z) { return x / z; });
  Tape* tp = &tape;
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(OpKind::Div, std::move(y), {ia, ib},
                     [tp, ia, ib](const Tensor& g, std::span<Tensor* const> p) {
                       const Tensor& av = tp->value(ia);
                       const Tensor& bv = tp->value(ib);
                       if (p[0]) {
                         Tensor ga(g.shape());
                         for_each_broadcast(g.shape(), av.shape(), bv.shape(),
                                            [&](std::size_t i, std::size_t, std::size_t j) { ga[i] = g[i] / bv[j]; });
                         accumulate(p[0], ga);
                       }
                       if (p[1]) {
                         Tensor gb(g.shape());
                         for_each_broadcast(g.shape(), av.shape(), bv.shape(),
                                            [&](std::size_t i, std::size_t ja, std::size_t jb) {
                                              gb[i] = -g[i] * av[ja] / (bv[jb] * bv[jb]);
                                            });
                         accumulate(p[1], gb);
                       }
                     });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double s) {
  return unary(OpKind::Scale, a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(OpKind::AddScalar, a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  Tensor y = mncastle::matmul(a.value(), b.value());
  Tape* tp = &tape;
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(OpKind::Matmul, std::move(y), {ia, ib},
                     [tp, ia, ib](const Tensor& g, std::span<Tensor* const> p) {
                       const Tensor& av = tp->value(ia);
                       const Tensor& bv = tp->value(ib);
                       if (p[0]) {
                         Tensor ga = mncastle::matmul(g, transpose_last2(bv));
                         if (av.rank() == 2 && ga.rank() > 2) {
                           ga = sum_to(ga.reshaped({batch_count(ga.shape()), av.dim(0), av.dim(1)}), av.shape());
                         }
                         accumulate(p[0], ga);
                       }
                       if (p[1]) {
                         Tensor gb = mncastle::matmul(transpose_last2(av), g);
                         if (bv.rank() == 2 && gb.rank() > 2) {
                           gb = sum_to(gb.reshaped({batch_count(gb.shape()), bv.dim(0), bv.dim(1)}), bv.shape());
                         }
                         accumulate(p[1], gb);
                       }
                     });
}

Var transpose(Var a) {
  Tape& tape = tape_of(a);
  return tape.record(OpKind::Transpose, transpose_last2(a.value()), {a.id()},
                     [](const Tensor& g, std::span<Tensor* const> p) {
                       if (p[0]) accumulate(p[0], transpose_last2(g));
                     });
}

Var exp(Var a) {
  return unary(OpKind::Exp, a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(OpKind::Log, a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(OpKind::Square, a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(Var a) {
  return unary(OpKind::Sqrt, a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

Var softplus(Var a) {
  return unary(OpKind::Softplus, a, softplus_value, [](double x, double) { return sigmoid(x); });
}

Var clamp_min(Var a, double floor) {
  return unary(OpKind::ClampMin, a, [floor](double x) { return std::max(x, floor); },
               [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return tape.record(OpKind::Sum, Tensor::scalar(s), {a.id()}, [](const Tensor& g, std::span<Tensor* const> p) {
    if (!p[0]) return;
    const double gv = g[0];
    for (double& v : p[0]->values()) v += gv;
  });
}

Var sum_last(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  if (x.rank() == 0) throw ShapeMismatch("sum_last on a scalar");
  const std::size_t n = x.dim(x.rank() - 1);
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  Tensor y(out_shape);
  for (std::size_t r = 0; r < y.size(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += x[r * n + c];
    y[r] = s;
  }
  return tape.record(OpKind::SumLast, std::move(y), {a.id()}, [n](const Tensor& g, std::span<Tensor* const> p) {
    if (!p[0]) return;
    auto d = p[0]->values();
    for (std::size_t r = 0; r < g.size(); ++r)
      for (std::size_t c = 0; c < n; ++c) d[r * n + c] += g[r];
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

namespace {

double lse(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

Var logsumexp(Var a) {
  Tape& tape = tape_of(a);
  const double y = lse(a.value().values());
  Tape* tp = &tape;
  const std::size_t ia = a.id();
  return tape.record(OpKind::LogSumExp, Tensor::scalar(y), {ia},
                     [tp, ia, y](const Tensor& g, std::span<Tensor* const> p) {
                       if (!p[0]) return;
                       const Tensor& x = tp->value(ia);
                       auto d = p[0]->values();
                       for (std::size_t i = 0; i < x.size(); ++i) d[i] += g[0] * std::exp(x[i] - y);
                     });
}

Var logsumexp_last(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  if (x.rank() == 0) throw ShapeMismatch("logsumexp_last on a scalar");
  const std::size_t n = x.dim(x.rank() - 1);
  Tensor y(Shape(x.shape().begin(), x.shape().end() - 1));
  for (std::size_t r = 0; r < y.size(); ++r) y[r] = lse(x.values().subspan(r * n, n));
  Tape* tp = &tape;
  const std::size_t ia = a.id();
  const std::size_t iy = tape.size();
  return tape.record(OpKind::LogSumExpLast, std::move(y), {ia},
                     [tp, ia, iy, n](const Tensor& g, std::span<Tensor* const> p) {
                       if (!p[0]) return;
                       const Tensor& xv = tp->value(ia);
                       const Tensor& yv = tp->value(iy);
                       auto d = p[0]->values();
                       for (std::size_t r = 0; r < g.size(); ++r)
                         for (std::size_t c = 0; c < n; ++c) d[r * n + c] += g[r] * std::exp(xv[r * n + c] - yv[r]);
                     });
}

Var triangular_solve(Var lower, Var rhs, bool transpose) {
  Tape& tape = tape_of(lower, rhs);
  Tensor x = mncastle::triangular_solve(lower.value(), rhs.value(), transpose);
  Tape* tp = &tape;
  const std::size_t il = lower.id();
  const std::size_t ix = tape.size();
  return tape.record(
      OpKind::TriangularSolve, std::move(x), {il, rhs.id()},
      [tp, il, ix, transpose](const Tensor& g, std::span<Tensor* const> p) {
        const Tensor& lv = tp->value(il);
        const Tensor& xv = tp->value(ix);
        // gb = L^{-T} g  (or L^{-1} g for the transposed solve)
        Tensor gb = mncastle::triangular_solve(lv, g, !transpose);
        if (p[0]) {
          Tensor gl = transpose ? mncastle::matmul(xv, transpose_last2(gb)) : mncastle::matmul(gb, transpose_last2(xv));
          gl = tril(-1.0 * gl);
          if (lv.rank() == 2 && gl.rank() > 2) {
            gl = sum_to(gl.reshaped({batch_count(gl.shape()), lv.dim(0), lv.dim(1)}), lv.shape());
          }
          accumulate(p[0], gl);
        }
        if (p[1]) accumulate(p[1], gb);
      });
}

Var cholesky(Var a, double jitter, int retries) {
  Tape& tape = tape_of(a);
  Tensor l = cholesky_with_retries(a.value(), jitter, retries);
  Tape* tp = &tape;
  const std::size_t il = tape.size();
  return tape.record(OpKind::Cholesky, std::move(l), {a.id()}, [tp, il](const Tensor& g, std::span<Tensor* const> p) {
    if (!p[0]) return;
    const Tensor& lv = tp->value(il);
    const std::size_t n = lv.dim(0);
    // Phi(L^T Lbar): lower triangle with halved diagonal.
    Tensor phi = tril(mncastle::matmul(transpose_last2(lv), g));
    for (std::size_t i = 0; i < n; ++i) phi[i * n + i] *= 0.5;
    Tensor left = mncastle::triangular_solve(lv, phi, true);                                 // L^{-T} Phi
    Tensor s = transpose_last2(mncastle::triangular_solve(lv, transpose_last2(left), true));  // L^{-T} Phi L^{-1}
    auto d = p[0]->values();
    for (std::size_t i = 0; i < n; ++i) {
      d[i * n + i] += s[i * n + i];
      for (std::size_t j = 0; j < i; ++j) d[i * n + j] += s[i * n + j] + s[j * n + i];
    }
  });
}

Var index_map(Var a, Shape out_shape, std::vector<std::ptrdiff_t> source) {
  Tape& tape = tape_of(a);
  if (source.size() != shape_size(out_shape)) throw ShapeMismatch("index_map source length differs from output size");
  const Tensor& x = a.value();
  Tensor y(std::move(out_shape));
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i] < 0) continue;
    if (static_cast<std::size_t>(source[i]) >= x.size()) throw ShapeMismatch("index_map source out of range");
    y[i] = x[static_cast<std::size_t>(source[i])];
  }
  return tape.record(OpKind::IndexMap, std::move(y), {a.id()},
                     [src = std::move(source)](const Tensor& g, std::span<Tensor* const> p) {
                       if (!p[0]) return;
                       auto d = p[0]->values();
                       for (std::size_t i = 0; i < src.size(); ++i)
                         if (src[i] >= 0) d[static_cast<std::size_t>(src[i])] += g[i];
                     });
}

Var reshape(Var a, Shape shape) {
  Tape& tape = tape_of(a);
  return tape.record(OpKind::Reshape, a.value().reshaped(std::move(shape)), {a.id()},
                     [](const Tensor& g, std::span<Tensor* const> p) {
                       if (!p[0]) return;
                       auto d = p[0]->values();
                       for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
                     });
}

Var nilpotent_inverse(Var c) {
  Tape& tape = tape_of(c);
  Tensor m = mncastle::nilpotent_inverse(c.value());
  Tape* tp = &tape;
  const std::size_t im = tape.size();
  return tape.record(OpKind::NilpotentInverse, std::move(m), {c.id()},
                     [tp, im](const Tensor& g, std::span<Tensor* const> p) {
                       if (!p[0]) return;
                       const Tensor& mv = tp->value(im);
                       const Tensor mt = transpose_last2(mv);
                       accumulate(p[0], mncastle::matmul(mncastle::matmul(mt, g), mt));
                     });
}

Var rbf_gram(Var x1, Var x2, Var variance, Var lengthscale) {
  Tape& tape = tape_of(x1, x2);
  tape_of(variance, lengthscale);
  if (x1.value().rank() != 1 || x2.value().rank() != 1) throw ShapeMismatch("rbf_gram needs vectors");
  const double var = variance.value().item();
  const double ls = lengthscale.value().item();
  const std::size_t n1 = x1.value().size();
  const std::size_t n2 = x2.value().size();
  Tensor k(Shape{n1, n2});
  const double inv = 1.0 / (2.0 * ls * ls);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      const double d = x1.value()[i] - x2.value()[j];
      k[i * n2 + j] = var * std::exp(-d * d * inv);
    }
  Tape* tp = &tape;
  const std::size_t i1 = x1.id();
  const std::size_t i2 = x2.id();
  const std::size_t ik = tape.size();
  return tape.record(
      OpKind::RbfGram, std::move(k), {i1, i2, variance.id(), lengthscale.id()},
      [tp, i1, i2, ik, var, ls](const Tensor& g, std::span<Tensor* const> p) {
        const Tensor& a = tp->value(i1);
        const Tensor& b = tp->value(i2);
        const Tensor& kv = tp->value(ik);
        const std::size_t n1v = a.size();
        const std::size_t n2v = b.size();
        const double ls2 = ls * ls;
        double gvar = 0.0;
        double gls = 0.0;
        for (std::size_t i = 0; i < n1v; ++i)
          for (std::size_t j = 0; j < n2v; ++j) {
            const double gk = g[i * n2v + j] * kv[i * n2v + j];
            if (gk == 0.0) continue;
            const double d = a[i] - b[j];
            gvar += gk / var;
            gls += gk * d * d / (ls2 * ls);
            if (p[0]) (*p[0])[i] -= gk * d / ls2;
            if (p[1]) (*p[1])[j] += gk * d / ls2;
          }
        if (p[2]) (*p[2])[0] += gvar;
        if (p[3]) (*p[3])[0] += gls;
      });
}

Var pl_log_prob(Var theta, std::span<const std::vector<std::size_t>> orderings) {
  Tape& tape = tape_of(theta);
  const Tensor& th = theta.value();
  if (th.rank() != 1) throw ShapeMismatch("pl_log_prob needs a score vector");
  const std::size_t n = th.size();
  std::vector<std::vector<std::size_t>> ords(orderings.begin(), orderings.end());
  for (const auto& o : ords) {
    if (o.size() != n) throw LengthMismatch("ordering length differs from score length");
  }
  Tensor y(Shape{ords.size()});
  // Suffix log-normalisers, kept for the backward pass.
  std::vector<double> suffix(ords.size() * n);
  for (std::size_t r = 0; r < ords.size(); ++r) {
    const auto& o = ords[r];
    double acc = -std::numeric_limits<double>::infinity();
    for (std::size_t i = n; i-- > 0;) {
      const double v = th[o[i]];
      const double m = std::max(acc, v);
      acc = m + std::log(std::exp(acc - m) + std::exp(v - m));
      suffix[r * n + i] = acc;
    }
    double lp = 0.0;
    for (std::size_t i = 0; i < n; ++i) lp += th[o[i]] - suffix[r * n + i];
    y[r] = lp;
  }
  Tape* tp = &tape;
  const std::size_t it = theta.id();
  return tape.record(OpKind::PlLogProb, std::move(y), {it},
                     [tp, it, n, ords = std::move(ords), suffix = std::move(suffix)](
                         const Tensor& g, std::span<Tensor* const> p) {
                       if (!p[0]) return;
                       const Tensor& thv = tp->value(it);
                       auto d = p[0]->values();
                       for (std::size_t r = 0; r < ords.size(); ++r) {
                         const auto& o = ords[r];
                         const double gr = g[r];
                         // d/dtheta_{o[u]} of -suffix_i is -softmax over u >= i.
                         for (std::size_t u = 0; u < n; ++u) {
                           double share = 0.0;
                           for (std::size_t i = 0; i <= u; ++i) share += std::exp(thv[o[u]] - suffix[r * n + i]);
                           d[o[u]] += gr * (1.0 - share);
                         }
                       }
                     });
}

}  // namespace mncastle::ad
