#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mncastle/autodiff.hpp"
#include "mncastle/metrics.hpp"
#include "mncastle/plackett_luce.hpp"
#include "mncastle/rng.hpp"
#include "mncastle/tensor.hpp"

namespace mncastle::castle {

using stochastic::CausalOrdering;

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Multiplicative learning-rate decay applied after every step.
  double decay = 0.999;
  /// Global gradient-norm clip; 0 disables clipping.
  double clip_norm = 10.0;
};

/// Adam minimizer with exponential learning-rate decay and global-norm
/// clipping. Moments are created lazily on the first step.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update. When `row_masks` is non-empty it holds one entry per
  /// parameter: nullptr, or a mask over the first axis whose false rows keep
  /// both their value and their moments.
  void step(std::span<Tensor* const> params, std::span<const Tensor> grads,
            std::span<const std::vector<bool>* const> row_masks = {});

  std::size_t steps() const noexcept { return steps_; }
  double learning_rate() const noexcept;
  const AdamConfig& config() const noexcept { return config_; }

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t steps_ = 0;
};

struct InferConfig {
  int iterations = 600;
  int particles = 10;
  double inducing_fraction = 0.64;
  /// Scale of the Gaussian likelihood on the spectral estimate.
  double obs_scale = 0.05;
  AdamConfig adam;
  double threshold = 0.1;
  double level = 0.99;
  /// Posterior draws used for edge decisions and coefficient summaries.
  int decision_samples = 400;
  /// GP input axis: nu_t = axis_scale * t / T.
  double axis_scale = 10.0;
  double baseline_decay = 0.9;
  double init_kernel_variance = 0.1;
  double init_lengthscale = 1.0;
  /// Initial whitened factor S = init_q_scale * I, i.e. Sigma_q(u) is this
  /// multiple of the prior Cholesky factor times its transpose.
  double init_q_scale = 0.1;
  double init_coefficient_scale = 0.1;
  double jitter = 1e-6;
  /// Forces (true) or disables (false) the stationary lengthscale prior;
  /// unset detects a time-constant spectrum.
  std::optional<bool> stationary;
  double stationary_lengthscale_mean = 1e3;
  double stationary_lengthscale_sd = 1e-3;

  void validate() const;
};

/// Closed-form size of the step-2 model plus the PL scores:
/// N + J N (N - 1) (1 + Tt + Tt (Tt + 1) / 2) + 2 + Tt.
std::size_t parameter_tally(std::size_t nodes, std::size_t scales, std::size_t inducing);

struct Step1Params {
  Tensor theta;          // N
  Tensor coef_mean;      // N (N - 1), node pairs r * (N - 1) + (c < r ? c : c - 1)
  Tensor coef_scale_raw;  // softplus^{-1} of the guide scale
};

/// Row k of every per-coefficient tensor belongs to coefficient k, see
/// coefficient_index. The inducing values are whitened: u = L_K v with
/// L_K the Cholesky factor of K(zeta, zeta) and q(v) = N(m, S S^T), so
/// mu_q(u) = L_K m and Sigma_q(u) = L_K S S^T L_K^T.
struct Step2Params {
  Tensor mean;            // K       GP prior mean C-bar
  Tensor q_mean;          // K x Tt  m
  Tensor q_offdiag;       // K x Tt (Tt - 1) / 2, packed strict lower triangle of S
  Tensor q_diag_raw;      // K x Tt, softplus^{-1} of the diagonal of S
  Tensor variance_raw;    // scalar
  Tensor lengthscale_raw;  // scalar
  Tensor inducing;        // Tt

  static constexpr std::size_t kGroups = 7;
  std::array<Tensor*, kGroups> groups() {
    return {&mean, &q_mean, &q_offdiag, &q_diag_raw, &variance_raw, &lengthscale_raw, &inducing};
  }
  std::array<const Tensor*, kGroups> groups() const {
    return {&mean, &q_mean, &q_offdiag, &q_diag_raw, &variance_raw, &lengthscale_raw, &inducing};
  }
};

struct VariationalState {
  std::size_t nodes = 0;
  std::size_t scales = 0;
  std::size_t samples = 0;
  std::size_t inducing_count = 0;
  std::vector<double> times;
  bool stationary = false;

  Step1Params step1;
  Step2Params step2;
  Adam adam1;
  Adam adam2;
  double baseline = 0.0;
  bool baseline_seeded = false;

  std::size_t coefficient_count() const { return scales * nodes * (nodes - 1); }
  /// PL scores plus every step-2 parameter; equals parameter_tally.
  std::size_t parameter_count() const;
  double kernel_variance() const;
  double kernel_lengthscale() const;
};

/// Row of coefficient (j, n, m), the weight of edge m -> n at scale j.
std::size_t coefficient_index(std::size_t j, std::size_t n, std::size_t m, std::size_t nodes);

/// Coefficients whose edge the ordering permits (m ranked before n).
std::vector<std::size_t> permitted_coefficients(const CausalOrdering& ordering, std::size_t scales);

VariationalState init_state(std::size_t nodes, std::size_t scales, std::size_t samples, const InferConfig& config,
                            bool stationary);

/// One REINFORCE + reparameterized step on the ordering model. Returns the
/// particle mean of the ELBO integrand f.
double svi1_step(const Tensor& x, VariationalState& state, const InferConfig& config, Rng& rng);

/// Per-particle score-function terms (f_s - baseline) d log q(order_s) / d theta
/// at the current state, particles x N. Used to check estimator bias.
Tensor reinforce_samples(const Tensor& x, const VariationalState& state, double baseline, std::size_t particles,
                         Rng& rng);

struct Step2Noise {
  Tensor eps_u;  // P x Tt x S
  Tensor eps_f;  // P x T x S
};

Step2Noise draw_step2_noise(std::size_t permitted, std::size_t inducing, std::size_t samples, std::size_t particles,
                            Rng& rng);

struct Step2Objective {
  ad::Var elbo;
  ad::Var log_likelihood;
  ad::Var kl;
  /// Leaves in Step2Params::groups() order.
  std::array<ad::Var, Step2Params::kGroups> leaves;
};

/// Records the step-2 ELBO for fixed noise on `tape`.
Step2Objective step2_objective(ad::Tape& tape, const VariationalState& state, const Tensor& s_hat,
                               std::span<const std::size_t> permitted, const Step2Noise& noise,
                               const InferConfig& config);

/// One reparameterized step on the GP model with the ordering held fixed.
/// Returns the ELBO sample.
double svi2_step(const Tensor& s_hat, const CausalOrdering& ordering, VariationalState& state,
                 const InferConfig& config, Rng& rng);

/// KL(N(mu, L L^T) || N(0, K)) for one coefficient, evaluated directly.
double gaussian_kl(std::span<const double> mu, const Tensor& l_q, const Tensor& k);

/// Unmasked draws of every coefficient path, K x T x draws.
Tensor sample_coefficients(const VariationalState& state, std::size_t draws, Rng& rng);

struct EdgeDecision {
  std::size_t scale = 0;
  std::size_t from = 0;
  std::size_t to = 0;
  metrics::EdgeKind kind = metrics::EdgeKind::Directed;
  /// Lower (1 - level) quantile of the time-mean |c| posterior.
  double lower_bound = 0.0;
};

/// Linear-interpolation quantile of a sample.
double quantile(std::vector<double> values, double q);

/// Edge m -> n at scale j is kept when the (1 - level) quantile of the
/// time-mean |c_{j,n,m}| draws exceeds `threshold`; pairs qualifying in
/// both directions become one undirected edge. `time_mean_abs` has one row
/// of at least 200 draws per coefficient.
std::vector<EdgeDecision> decide_edges(const std::vector<std::vector<double>>& time_mean_abs, std::size_t scales,
                                       std::size_t nodes, double threshold, double level);

struct CoefficientSummary {
  std::size_t scale = 0;
  std::size_t from = 0;
  std::size_t to = 0;
  bool permitted = false;
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
};

struct Posterior {
  std::size_t nodes = 0;
  std::size_t scales = 0;
  std::size_t samples = 0;
  std::vector<double> theta;
  CausalOrdering mode;
  double tau_hat = 0.0;
  double kernel_variance = 0.0;
  double kernel_lengthscale = 0.0;
  bool stationary = false;
  /// Masked by the mode ordering; entries outside its support are zero.
  std::vector<CoefficientSummary> coefficients;
  std::vector<EdgeDecision> edges;
  std::vector<double> elbo1;
  std::vector<double> elbo2;

  metrics::PredictedGraph graph() const;
};

/// Summaries and edge decisions from the current state.
Posterior summarize(const VariationalState& state, const InferConfig& config, Rng& rng);

/// Alternates svi1_step and svi2_step for config.iterations rounds.
/// Failures are rethrown with the failing step and iteration.
Posterior train(const Tensor& x, const Tensor& s_hat, const InferConfig& config, Rng& rng);

}  // namespace mncastle::castle
