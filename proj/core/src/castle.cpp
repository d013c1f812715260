#include "mncastle/castle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mncastle/errors.hpp"

namespace mncastle::castle {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

std::size_t packed_lower(std::size_t a, std::size_t b) { return a * (a - 1) / 2 + b; }

bool all_finite(std::span<const Tensor> ts) {
  return std::all_of(ts.begin(), ts.end(), [](const Tensor& t) { return t.all_finite(); });
}

}  // namespace

// ---------------------------------------------------------------------------
// Optimizer

double Adam::learning_rate() const noexcept {
  return config_.learning_rate * std::pow(config_.decay, static_cast<double>(steps_));
}

void Adam::step(std::span<Tensor* const> params, std::span<const Tensor> grads,
                std::span<const std::vector<bool>* const> row_masks) {
  if (params.size() != grads.size()) throw LengthMismatch("Adam: parameter and gradient counts differ");
  if (!row_masks.empty() && row_masks.size() != params.size()) throw LengthMismatch("Adam: one mask per parameter");
  if (!all_finite(grads)) throw NonFiniteLoss("non-finite gradient");
  if (m_.empty()) {
    for (Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  if (m_.size() != params.size()) throw LengthMismatch("Adam: parameter set changed between steps");

  double norm_sq = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.values()) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  const double factor = config_.clip_norm > 0.0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;

  const double lr = learning_rate();
  ++steps_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = grads[k];
    if (g.shape() != p.shape()) throw ShapeMismatch("Adam: gradient shape differs from parameter");
    const std::vector<bool>* mask = row_masks.empty() ? nullptr : row_masks[k];
    const std::size_t row = mask && p.rank() > 0 ? p.size() / p.dim(0) : p.size();
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (mask && !(*mask)[i / row]) continue;
      const double gi = factor * g[i];
      m_[k][i] = config_.beta1 * m_[k][i] + (1.0 - config_.beta1) * gi;
      v_[k][i] = config_.beta2 * v_[k][i] + (1.0 - config_.beta2) * gi * gi;
      p[i] -= lr * (m_[k][i] / bc1) / (std::sqrt(v_[k][i] / bc2) + config_.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// State

void InferConfig::validate() const {
  if (iterations < 0) throw InvalidArgument("iterations must be nonnegative");
  if (particles < 1) throw InvalidArgument("particles must be at least 1");
  if (!(inducing_fraction > 0.0 && inducing_fraction <= 1.0)) throw InvalidArgument("inducing fraction must lie in (0, 1]");
  if (!(obs_scale > 0.0)) throw InvalidArgument("observation scale must be positive");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("credibility level must lie in (0, 1)");
  if (decision_samples < 200) throw InvalidArgument("edge decisions need at least 200 posterior samples");
  if (!(axis_scale > 0.0)) throw InvalidArgument("axis scale must be positive");
  if (!(init_kernel_variance > 0.0 && init_lengthscale > 0.0)) throw InvalidArgument("kernel initial values must be positive");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) throw InvalidArgument("baseline decay must lie in [0, 1)");
}

std::size_t parameter_tally(std::size_t nodes, std::size_t scales, std::size_t inducing) {
  const std::size_t per_coefficient = 1 + inducing + inducing * (inducing + 1) / 2;
  return nodes + scales * nodes * (nodes - 1) * per_coefficient + 2 + inducing;
}

std::size_t VariationalState::parameter_count() const {
  std::size_t total = step1.theta.size();
  for (const Tensor* t : step2.groups()) total += t->size();
  return total;
}

double VariationalState::kernel_variance() const { return softplus(step2.variance_raw.item()); }
double VariationalState::kernel_lengthscale() const { return softplus(step2.lengthscale_raw.item()); }

std::size_t coefficient_index(std::size_t j, std::size_t n, std::size_t m, std::size_t nodes) {
  if (n == m || n >= nodes || m >= nodes) throw InvalidArgument("coefficient index needs two distinct nodes");
  return (j * nodes + n) * (nodes - 1) + (m < n ? m : m - 1);
}

namespace {

struct CoefficientKey {
  std::size_t scale, to, from;
};

CoefficientKey decode(std::size_t k, std::size_t nodes) {
  const std::size_t per_scale = nodes * (nodes - 1);
  const std::size_t r = k % per_scale;
  const std::size_t n = r / (nodes - 1);
  const std::size_t mm = r % (nodes - 1);
  return {k / per_scale, n, mm < n ? mm : mm + 1};
}

}  // namespace

std::vector<std::size_t> permitted_coefficients(const CausalOrdering& ordering, std::size_t scales) {
  const std::size_t n = ordering.size();
  const auto pos = ordering.positions();
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < scales; ++j)
    for (std::size_t to = 0; to < n; ++to)
      for (std::size_t from = 0; from < n; ++from)
        if (from != to && pos[from] < pos[to]) out.push_back(coefficient_index(j, to, from, n));
  return out;
}

VariationalState init_state(std::size_t nodes, std::size_t scales, std::size_t samples, const InferConfig& config,
                            bool stationary) {
  config.validate();
  if (nodes < 2 || scales < 1 || samples < 2) throw InvalidArgument("inference needs N >= 2, J >= 1 and T >= 2");
  VariationalState s;
  s.nodes = nodes;
  s.scales = scales;
  s.samples = samples;
  s.stationary = stationary;
  s.inducing_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(config.inducing_fraction * static_cast<double>(samples) - 1e-9)), 1, samples);
  s.times.resize(samples);
  for (std::size_t t = 0; t < samples; ++t)
    s.times[t] = config.axis_scale * static_cast<double>(t) / static_cast<double>(samples);

  const std::size_t entries = nodes * (nodes - 1);
  s.step1.theta = Tensor(Shape{nodes});
  s.step1.coef_mean = Tensor(Shape{entries});
  s.step1.coef_scale_raw = Tensor(Shape{entries}, softplus_inverse(config.init_coefficient_scale));

  const std::size_t k = s.coefficient_count();
  const std::size_t tt = s.inducing_count;
  auto& p = s.step2;
  p.mean = Tensor(Shape{k});
  p.q_mean = Tensor(Shape{k, tt});
  p.q_offdiag = Tensor(Shape{k, tt * (tt - 1) / 2});
  p.q_diag_raw = Tensor(Shape{k, tt});
  const double lengthscale = stationary ? config.stationary_lengthscale_mean : config.init_lengthscale;
  p.variance_raw = Tensor::scalar(softplus_inverse(config.init_kernel_variance));
  p.lengthscale_raw = Tensor::scalar(softplus_inverse(lengthscale));
  p.inducing = Tensor(Shape{tt});
  const double lo = s.times.front();
  const double hi = s.times.back();
  for (std::size_t i = 0; i < tt; ++i)
    p.inducing[i] = tt == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(tt - 1);

  // Whitened guide: q(v) = N(m, S S^T) with u = L_K v, started at S = q_scale * I.
  for (double& v : p.q_diag_raw.values()) v = softplus_inverse(config.init_q_scale);
  s.adam1 = Adam(config.adam);
  s.adam2 = Adam(config.adam);
  if (s.parameter_count() != parameter_tally(nodes, scales, tt)) {
    throw Error("parameter count does not match the closed-form tally");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Step 1: ordering model

namespace {

struct Step1Graph {
  ad::Var theta;
  ad::Var mean;
  ad::Var scale_raw;
  ad::Var f;
  ad::Var log_q_order;
};

Step1Graph step1_graph(ad::Tape& tape, const VariationalState& s, const Tensor& sxx,
                       const std::vector<std::vector<std::size_t>>& orders, const Tensor& eps) {
  const std::size_t n = s.nodes;
  const std::size_t particles = orders.size();
  const std::size_t entries = n * (n - 1);
  Step1Graph g;
  g.theta = tape.leaf(s.step1.theta);
  g.mean = tape.leaf(s.step1.coef_mean);
  g.scale_raw = tape.leaf(s.step1.coef_scale_raw);

  const ad::Var sd = ad::softplus(g.scale_raw);
  const ad::Var eps_v = tape.constant(eps);
  const ad::Var chat = g.mean + sd * eps_v;  // particles x N (N - 1)

  // Entry (n, m) enters C only when the sampled ordering ranks m before n.
  std::vector<std::ptrdiff_t> src(particles * n * n, -1);
  Tensor mask(Shape{particles, entries});
  for (std::size_t p = 0; p < particles; ++p) {
    std::vector<std::size_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[orders[p][i]] = i;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        if (r == c || pos[c] > pos[r]) continue;
        const std::size_t e = r * (n - 1) + (c < r ? c : c - 1);
        src[(p * n + r) * n + c] = static_cast<std::ptrdiff_t>(p * entries + e);
        mask[p * entries + e] = 1.0;
      }
  }
  const ad::Var c = ad::index_map(chat, Shape{particles, n, n}, std::move(src));
  const ad::Var ic = tape.constant(Tensor::identity(n)) - c;
  const ad::Var a = ad::matmul(ic, tape.constant(sxx));
  const ad::Var quad = ad::sum_last(ad::reshape(ic * a, Shape{particles, n * n}));
  const double samples = static_cast<double>(s.samples);
  const double used = static_cast<double>(entries / 2);
  const ad::Var loglik = (-0.5) * quad - 0.5 * samples * static_cast<double>(n) * kLog2Pi;

  // Prior N(0, 1) and guide densities over the entries the ordering uses.
  const ad::Var mask_v = tape.constant(mask);
  const ad::Var logprior = (-0.5) * ad::sum_last(mask_v * ad::square(chat)) - 0.5 * used * kLog2Pi;
  Tensor eps_term(Shape{particles});
  for (std::size_t p = 0; p < particles; ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < entries; ++i) acc += mask[p * entries + i] * eps[p * entries + i] * eps[p * entries + i];
    eps_term[p] = -0.5 * acc - 0.5 * used * kLog2Pi;
  }
  const ad::Var logq = tape.constant(eps_term) - ad::sum_last(mask_v * ad::log(sd));
  g.log_q_order = ad::pl_log_prob(g.theta, orders);
  // Uniform prior over the N! orderings.
  const double log_prior_order = -std::lgamma(static_cast<double>(n) + 1.0);
  g.f = loglik + logprior - logq - g.log_q_order + log_prior_order;
  return g;
}

Tensor scatter_matrix(const Tensor& x) {
  if (x.rank() != 2) throw ShapeMismatch("expected an N x T array");
  return matmul(x, transpose_last2(x));
}

void draw_step1(const VariationalState& s, std::size_t particles, Rng& rng,
                std::vector<std::vector<std::size_t>>& orders, Tensor& eps) {
  const std::size_t entries = s.nodes * (s.nodes - 1);
  orders.clear();
  for (std::size_t p = 0; p < particles; ++p) orders.push_back(stochastic::pl_sample(s.step1.theta.values(), rng).nodes());
  eps = Tensor(Shape{particles, entries});
  for (double& v : eps.values()) v = rng.normal();
}

}  // namespace

double svi1_step(const Tensor& x, VariationalState& state, const InferConfig& config, Rng& rng) {
  if (x.rank() != 2 || x.dim(0) != state.nodes || x.dim(1) != state.samples) {
    throw ShapeMismatch("data shape does not match the variational state");
  }
  const auto particles = static_cast<std::size_t>(config.particles);
  std::vector<std::vector<std::size_t>> orders;
  Tensor eps;
  draw_step1(state, particles, rng, orders, eps);

  ad::Tape tape;
  const Step1Graph g = step1_graph(tape, state, scatter_matrix(x), orders, eps);
  const Tensor& f = g.f.value();
  if (!f.all_finite()) throw NonFiniteLoss("step-1 objective is not finite");
  double f_mean = 0.0;
  for (double v : f.values()) f_mean += v;
  f_mean /= static_cast<double>(particles);

  if (!state.baseline_seeded) {
    state.baseline = f_mean;
    state.baseline_seeded = true;
  }
  Tensor advantage(Shape{particles});
  for (std::size_t p = 0; p < particles; ++p) advantage[p] = f[p] - state.baseline;
  const ad::Var surrogate = ad::mean(g.f + g.log_q_order * tape.constant(advantage));
  const ad::Var loss = -surrogate;
  const std::array<ad::Var, 3> inputs{g.theta, g.mean, g.scale_raw};
  auto grads = tape.grad(loss, inputs);
  std::array<Tensor*, 3> params{&state.step1.theta, &state.step1.coef_mean, &state.step1.coef_scale_raw};
  state.adam1.step(params, grads.adjoints);
  state.baseline = config.baseline_decay * state.baseline + (1.0 - config.baseline_decay) * f_mean;
  return f_mean;
}

Tensor reinforce_samples(const Tensor& x, const VariationalState& state, double baseline, std::size_t particles,
                         Rng& rng) {
  std::vector<std::vector<std::size_t>> orders;
  Tensor eps;
  draw_step1(state, particles, rng, orders, eps);
  const Tensor sxx = scatter_matrix(x);
  const std::size_t n = state.nodes;
  Tensor out(Shape{particles, n});
  for (std::size_t p = 0; p < particles; ++p) {
    ad::Tape tape;
    std::vector<std::vector<std::size_t>> one{orders[p]};
    Tensor eps_p(Shape{1, eps.dim(1)});
    std::copy_n(eps.values().begin() + static_cast<long>(p * eps.dim(1)), eps.dim(1), eps_p.values().begin());
    const Step1Graph g = step1_graph(tape, state, sxx, one, eps_p);
    const double weight = g.f.value()[0] - baseline;
    const std::array<ad::Var, 1> inputs{g.theta};
    const auto grads = tape.grad(ad::sum(g.log_q_order), inputs);
    for (std::size_t i = 0; i < n; ++i) out[p * n + i] = weight * grads.adjoints[0][i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Step 2: batched sparse GPs

Step2Noise draw_step2_noise(std::size_t permitted, std::size_t inducing, std::size_t samples, std::size_t particles,
                            Rng& rng) {
  Step2Noise noise{Tensor(Shape{permitted, inducing, particles}), Tensor(Shape{permitted, samples, particles})};
  for (double& v : noise.eps_u.values()) v = rng.normal();
  for (double& v : noise.eps_f.values()) v = rng.normal();
  return noise;
}

namespace {

struct GpPaths {
  ad::Var f;       // P x T x S
  ad::Var mu;      // P x Tt x 1
  ad::Var lq;      // P x Tt x Tt
  ad::Var q_diag;  // P x Tt
  ad::Var lk;      // Tt x Tt
  ad::Var lengthscale;
};

ad::Var gather_rows(ad::Var v, std::span<const std::size_t> rows, std::size_t width) {
  std::vector<std::ptrdiff_t> src(rows.size() * width);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t i = 0; i < width; ++i) src[r * width + i] = static_cast<std::ptrdiff_t>(rows[r] * width + i);
  return ad::index_map(v, Shape{rows.size(), width}, std::move(src));
}

// `vars` follows Step2Params::groups() order.
GpPaths gp_paths(ad::Tape& tape, const std::array<ad::Var, Step2Params::kGroups>& vars, std::span<const double> times,
                 std::span<const std::size_t> rows, const Tensor& eps_u, const Tensor& eps_f, double jitter) {
  const std::size_t p = rows.size();
  const std::size_t tt = vars[6].value().size();
  const std::size_t samples = times.size();
  const std::size_t packed = tt * (tt - 1) / 2;

  GpPaths out;
  const ad::Var cbar = ad::reshape(gather_rows(vars[0], rows, 1), Shape{p, 1, 1});
  out.mu = ad::reshape(gather_rows(vars[1], rows, tt), Shape{p, tt, 1});
  const ad::Var off = gather_rows(vars[2], rows, packed);
  out.q_diag = ad::softplus(gather_rows(vars[3], rows, tt));
  std::vector<std::ptrdiff_t> src_off(p * tt * tt, -1);
  std::vector<std::ptrdiff_t> src_diag(p * tt * tt, -1);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t a = 0; a < tt; ++a) {
      src_diag[(r * tt + a) * tt + a] = static_cast<std::ptrdiff_t>(r * tt + a);
      for (std::size_t b = 0; b < a; ++b)
        src_off[(r * tt + a) * tt + b] = static_cast<std::ptrdiff_t>(r * packed + packed_lower(a, b));
    }
  out.lq = ad::index_map(off, Shape{p, tt, tt}, std::move(src_off)) +
           ad::index_map(out.q_diag, Shape{p, tt, tt}, std::move(src_diag));

  const ad::Var variance = ad::softplus(vars[4]);
  out.lengthscale = ad::softplus(vars[5]);
  const ad::Var zeta = vars[6];
  const ad::Var nu = tape.constant(Tensor(Shape{samples}, std::vector<double>(times.begin(), times.end())));
  const ad::Var kuu = ad::rbf_gram(zeta, zeta, variance, out.lengthscale);
  out.lk = ad::cholesky(kuu, jitter, 3);
  const ad::Var kfu = ad::rbf_gram(nu, zeta, variance, out.lengthscale);  // T x Tt
  const ad::Var w = ad::triangular_solve(out.lk, ad::transpose(kfu));    // Tt x T
  const ad::Var wt = ad::transpose(w);                                    // T x Tt
  const ad::Var q_ff = ad::sum_last(ad::square(wt));                      // T
  const ad::Var sd = ad::reshape(ad::sqrt(ad::clamp_min(variance - q_ff, 1e-12)), Shape{samples, 1});

  // u = L_K v, so K_fu K_uu^{-1} u = W^T v.
  const ad::Var v = out.mu + ad::matmul(out.lq, tape.constant(eps_u));   // P x Tt x S
  const ad::Var fmean = ad::matmul(wt, v);                               // P x T x S
  out.f = fmean + cbar + sd * tape.constant(eps_f);
  return out;
}

}  // namespace

Step2Objective step2_objective(ad::Tape& tape, const VariationalState& state, const Tensor& s_hat,
                               std::span<const std::size_t> permitted, const Step2Noise& noise,
                               const InferConfig& config) {
  const std::size_t n = state.nodes;
  const std::size_t scales = state.scales;
  const std::size_t samples = state.samples;
  const std::size_t tt = state.inducing_count;
  const std::size_t p = permitted.size();
  const std::size_t particles = noise.eps_u.dim(2);
  if (s_hat.shape() != Shape{scales, samples, n, n}) throw ShapeMismatch("spectral tensor does not match the state");
  if (noise.eps_u.shape() != Shape{p, tt, particles} || noise.eps_f.shape() != Shape{p, samples, particles}) {
    throw ShapeMismatch("step-2 noise has the wrong shape");
  }

  Step2Objective obj;
  const auto groups = state.step2.groups();
  for (std::size_t i = 0; i < Step2Params::kGroups; ++i) obj.leaves[i] = tape.leaf(*groups[i]);
  const GpPaths gp = gp_paths(tape, obj.leaves, state.times, permitted, noise.eps_u, noise.eps_f, config.jitter);

  // Scatter the permitted paths into node-frame causal matrices.
  std::vector<std::ptrdiff_t> local(state.coefficient_count(), -1);
  for (std::size_t r = 0; r < p; ++r) local[permitted[r]] = static_cast<std::ptrdiff_t>(r);
  const std::size_t batch = particles * scales * samples;
  std::vector<std::ptrdiff_t> src_c(batch * n * n, -1);
  for (std::size_t s = 0; s < particles; ++s)
    for (std::size_t j = 0; j < scales; ++j)
      for (std::size_t t = 0; t < samples; ++t)
        for (std::size_t to = 0; to < n; ++to)
          for (std::size_t from = 0; from < n; ++from) {
            if (to == from) continue;
            const std::ptrdiff_t r = local[coefficient_index(j, to, from, n)];
            if (r < 0) continue;
            const std::size_t out = (((s * scales + j) * samples + t) * n + to) * n + from;
            src_c[out] = (r * static_cast<std::ptrdiff_t>(samples) + static_cast<std::ptrdiff_t>(t)) *
                             static_cast<std::ptrdiff_t>(particles) +
                         static_cast<std::ptrdiff_t>(s);
          }
  const ad::Var c = ad::index_map(gp.f, Shape{batch, n, n}, std::move(src_c));
  const ad::Var m = ad::nilpotent_inverse(c);
  const ad::Var s_model = ad::matmul(m, ad::transpose(m));

  // Lower triangle with diagonal of every (j, t) slice.
  const std::size_t entries = n * (n + 1) / 2;
  const std::size_t observed = scales * samples * entries;
  std::vector<std::ptrdiff_t> src_obs(particles * observed);
  Tensor target(Shape{observed});
  for (std::size_t jt = 0; jt < scales * samples; ++jt) {
    std::size_t e = 0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b <= a; ++b, ++e) {
        target[jt * entries + e] = s_hat[(jt * n + a) * n + b];
        for (std::size_t s = 0; s < particles; ++s)
          src_obs[s * observed + jt * entries + e] =
              static_cast<std::ptrdiff_t>(((s * scales * samples + jt) * n + a) * n + b);
      }
  }
  const ad::Var fitted = ad::index_map(s_model, Shape{particles, observed}, std::move(src_obs));
  const ad::Var resid = fitted - tape.constant(target);
  const double sigma = config.obs_scale;
  obj.log_likelihood = (-0.5 / (sigma * sigma * static_cast<double>(particles))) * ad::sum(ad::square(resid)) -
                       static_cast<double>(observed) * (std::log(sigma) + 0.5 * kLog2Pi);

  // KL(q(u) || p(u)) = KL(N(m, S S^T) || N(0, I)) in whitened coordinates,
  // summed over the permitted coefficients.
  const ad::Var logdet_q = 2.0 * ad::sum(ad::log(gp.q_diag));
  obj.kl = 0.5 * (ad::sum(ad::square(gp.lq)) + ad::sum(ad::square(gp.mu)) - logdet_q) -
           0.5 * static_cast<double>(p) * static_cast<double>(tt);

  obj.elbo = obj.log_likelihood - obj.kl;
  if (state.stationary) {
    const double sd = config.stationary_lengthscale_sd;
    const ad::Var z = (1.0 / sd) * (gp.lengthscale - config.stationary_lengthscale_mean);
    obj.elbo = obj.elbo - 0.5 * ad::square(z) - (std::log(sd) + 0.5 * kLog2Pi);
  }
  return obj;
}

double svi2_step(const Tensor& s_hat, const CausalOrdering& ordering, VariationalState& state,
                 const InferConfig& config, Rng& rng) {
  if (ordering.size() != state.nodes) throw LengthMismatch("ordering length differs from node count");
  const auto permitted = permitted_coefficients(ordering, state.scales);
  const Step2Noise noise = draw_step2_noise(permitted.size(), state.inducing_count, state.samples,
                                            static_cast<std::size_t>(config.particles), rng);
  ad::Tape tape;
  const Step2Objective obj = step2_objective(tape, state, s_hat, permitted, noise, config);
  const double elbo = obj.elbo.value().item();
  if (!std::isfinite(elbo)) throw NonFiniteLoss("step-2 ELBO is not finite");
  auto grads = tape.grad(obj.elbo, obj.leaves);
  for (Tensor& g : grads.adjoints)
    for (double& v : g.values()) v = -v;

  std::vector<bool> rows(state.coefficient_count(), false);
  for (std::size_t k : permitted) rows[k] = true;
  const std::array<const std::vector<bool>*, Step2Params::kGroups> masks{&rows, &rows, &rows, &rows,
                                                                         nullptr, nullptr, nullptr};
  auto params = state.step2.groups();
  state.adam2.step(params, grads.adjoints, masks);
  return elbo;
}

double gaussian_kl(std::span<const double> mu, const Tensor& l_q, const Tensor& k) {
  const std::size_t n = mu.size();
  const Tensor lk = cholesky(k);
  const Tensor b = triangular_solve(lk, l_q);
  const Tensor a = triangular_solve(lk, Tensor(Shape{n, 1}, std::vector<double>(mu.begin(), mu.end())));
  double tr = 0.0, quad = 0.0, logdet_k = 0.0, logdet_q = 0.0;
  for (double v : b.values()) tr += v * v;
  for (double v : a.values()) quad += v * v;
  for (std::size_t i = 0; i < n; ++i) {
    logdet_k += 2.0 * std::log(lk[i * n + i]);
    logdet_q += 2.0 * std::log(std::abs(l_q[i * n + i]));
  }
  return 0.5 * (tr + quad - static_cast<double>(n) + logdet_k - logdet_q);
}

Tensor sample_coefficients(const VariationalState& state, std::size_t draws, Rng& rng) {
  const std::size_t k = state.coefficient_count();
  std::vector<std::size_t> rows(k);
  for (std::size_t i = 0; i < k; ++i) rows[i] = i;
  const Step2Noise noise = draw_step2_noise(k, state.inducing_count, state.samples, draws, rng);
  ad::Tape tape;
  std::array<ad::Var, Step2Params::kGroups> vars;
  const auto groups = state.step2.groups();
  for (std::size_t i = 0; i < Step2Params::kGroups; ++i) vars[i] = tape.constant(*groups[i]);
  const GpPaths gp = gp_paths(tape, vars, state.times, rows, noise.eps_u, noise.eps_f, 1e-6);
  return gp.f.value();
}

// ---------------------------------------------------------------------------
// Posterior

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<EdgeDecision> decide_edges(const std::vector<std::vector<double>>& time_mean_abs, std::size_t scales,
                                       std::size_t nodes, double threshold, double level) {
  if (time_mean_abs.size() != scales * nodes * (nodes - 1)) throw ShapeMismatch("one sample row per coefficient expected");
  std::vector<double> lower(time_mean_abs.size());
  for (std::size_t k = 0; k < lower.size(); ++k) {
    if (time_mean_abs[k].size() < 200) throw InvalidArgument("edge decisions need at least 200 posterior samples");
    lower[k] = quantile(time_mean_abs[k], 1.0 - level);
  }
  std::vector<EdgeDecision> edges;
  for (std::size_t j = 0; j < scales; ++j)
    for (std::size_t a = 0; a < nodes; ++a)
      for (std::size_t b = a + 1; b < nodes; ++b) {
        const double ab = lower[coefficient_index(j, b, a, nodes)];  // a -> b
        const double ba = lower[coefficient_index(j, a, b, nodes)];  // b -> a
        const bool fwd = ab > threshold;
        const bool bwd = ba > threshold;
        if (fwd && bwd) {
          edges.push_back({j, a, b, metrics::EdgeKind::Undirected, std::min(ab, ba)});
        } else if (fwd) {
          edges.push_back({j, a, b, metrics::EdgeKind::Directed, ab});
        } else if (bwd) {
          edges.push_back({j, b, a, metrics::EdgeKind::Directed, ba});
        }
      }
  return edges;
}

metrics::PredictedGraph Posterior::graph() const {
  metrics::PredictedGraph g{scales, nodes, {}};
  for (const auto& e : edges) g.edges.push_back({e.scale, e.from, e.to, e.kind});
  return g;
}

Posterior summarize(const VariationalState& state, const InferConfig& config, Rng& rng) {
  Posterior post;
  post.nodes = state.nodes;
  post.scales = state.scales;
  post.samples = state.samples;
  post.theta.assign(state.step1.theta.values().begin(), state.step1.theta.values().end());
  post.mode = stochastic::pl_mode(post.theta);
  post.kernel_variance = state.kernel_variance();
  post.kernel_lengthscale = state.kernel_lengthscale();
  post.tau_hat = 1.0 / post.kernel_lengthscale;
  post.stationary = state.stationary;

  const auto draws = static_cast<std::size_t>(config.decision_samples);
  const Tensor paths = sample_coefficients(state, draws, rng);  // K x T x D
  const std::size_t k_count = state.coefficient_count();
  const std::size_t samples = state.samples;
  std::vector<bool> permitted(k_count, false);
  for (std::size_t k : permitted_coefficients(post.mode, state.scales)) permitted[k] = true;

  std::vector<std::vector<double>> time_mean_abs(k_count, std::vector<double>(draws, 0.0));
  const double lo_q = 0.5 * (1.0 - config.level);
  std::vector<double> column(draws);
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto key = decode(k, state.nodes);
    CoefficientSummary cs{key.scale, key.from, key.to, permitted[k], std::vector<double>(samples, 0.0),
                          std::vector<double>(samples, 0.0), std::vector<double>(samples, 0.0)};
    for (std::size_t t = 0; t < samples; ++t) {
      const double* row = paths.values().data() + (k * samples + t) * draws;
      for (std::size_t d = 0; d < draws; ++d) time_mean_abs[k][d] += std::abs(row[d]) / static_cast<double>(samples);
      if (!permitted[k]) continue;
      column.assign(row, row + draws);
      double mean = 0.0;
      for (double v : column) mean += v;
      cs.mean[t] = mean / static_cast<double>(draws);
      cs.lower[t] = quantile(column, lo_q);
      cs.upper[t] = quantile(column, 1.0 - lo_q);
    }
    post.coefficients.push_back(std::move(cs));
  }
  post.edges = decide_edges(time_mean_abs, state.scales, state.nodes, config.threshold, config.level);
  return post;
}

Posterior train(const Tensor& x, const Tensor& s_hat, const InferConfig& config, Rng& rng) {
  config.validate();
  if (x.rank() != 2 || s_hat.rank() != 4) throw ShapeMismatch("expected N x T data and a J x T x N x N spectrum");
  const std::size_t n = x.dim(0);
  const std::size_t samples = x.dim(1);
  if (s_hat.dim(1) != samples || s_hat.dim(2) != n || s_hat.dim(3) != n) {
    throw ShapeMismatch("data and spectral tensor disagree on N or T");
  }
  bool stationary = false;
  if (config.stationary) {
    stationary = *config.stationary;
  } else {
    double worst = 0.0;
    const std::size_t nn = n * n;
    for (std::size_t j = 0; j < s_hat.dim(0); ++j)
      for (std::size_t t = 1; t < samples; ++t)
        for (std::size_t e = 0; e < nn; ++e)
          worst = std::max(worst, std::abs(s_hat[(j * samples + t) * nn + e] - s_hat[j * samples * nn + e]));
    stationary = worst < 1e-8;
  }
  VariationalState state = init_state(n, s_hat.dim(0), samples, config, stationary);
  Rng rng1 = rng.split("svi1");
  Rng rng2 = rng.split("svi2");
  std::vector<double> elbo1, elbo2;
  elbo1.reserve(static_cast<std::size_t>(config.iterations));
  elbo2.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    try {
      elbo1.push_back(svi1_step(x, state, config, rng1));
    } catch (const Error& e) {
      throw InferenceFailure("svi1 step failed at iteration " + std::to_string(it) + ": " + e.what());
    }
    const CausalOrdering mode = stochastic::pl_mode(state.step1.theta.values());
    try {
      elbo2.push_back(svi2_step(s_hat, mode, state, config, rng2));
    } catch (const Error& e) {
      throw InferenceFailure("svi2 step failed at iteration " + std::to_string(it) + ": " + e.what());
    }
  }
  Rng post_rng = rng.split("posterior");
  Posterior post = summarize(state, config, post_rng);
  post.elbo1 = std::move(elbo1);
  post.elbo2 = std::move(elbo2);
  return post;
}

}  // namespace mncastle::castle
